"""Link cryptoasset attribution tags to actors in a knowledge graph."""

__version__ = "0.1.0"
