"""Graph-recurrent syntax encoders and their desk-scale experiment harness."""

__version__ = "0.1.0"
