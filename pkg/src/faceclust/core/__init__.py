# SPDX-License-Identifier: MIT
# Core subpackage: records, clustering, aggregation, association and metrics.
