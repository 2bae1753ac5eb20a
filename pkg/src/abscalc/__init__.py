"""Exact and p-adic computations with q-deformed divided powers, Delta-connections and Hodge-Tate modules."""

__version__ = "0.1.0"
