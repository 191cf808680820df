# Copyright 2026 The elkc Authors.
# See LICENSE file for licensing details.

"""Three-value lossy compression of state-change tensors for distributed training."""
