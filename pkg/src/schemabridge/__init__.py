"""schemabridge: runtime JSON schema mismatch detection and repair middleware.

A transparent HTTP proxy that rewrites request bodies between schema versions:
deterministic structural diffing plus model-assisted semantic analysis, two
resolution strategies (per-request transformation and compiled-once adapter
programs), and a three-tier safeguard stack that guarantees an output for
every request. A benchmark harness reproduces the evaluation protocol at desk
scale against a deterministic mock backend.
"""

__version__ = "0.1.0"
