# SPDX-License-Identifier: MIT
"""Command-line entry point and library-callable runners."""
