# Copyright 2026 The elkc Authors.
# See LICENSE file for licensing details.

"""Integration tests module."""
