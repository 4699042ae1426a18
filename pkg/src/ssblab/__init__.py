"""Nested-lattice seed watermarking laboratory."""
