"""Entry point for the lego-qml CLI."""

from src.lego_qml.cli import app

if __name__ == "__main__":
    app()
