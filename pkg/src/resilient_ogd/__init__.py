"""Byzantine-resilient online distributed gradient descent on scalar states."""

__version__ = "0.1.0"
