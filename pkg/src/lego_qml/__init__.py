"""lego-qml - frozen classical feature blocks composed with trainable variational quantum circuit heads."""

__version__ = "0.1.0"
