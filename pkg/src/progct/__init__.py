"""Progressive low-dose CT denoising toolkit."""

__version__ = "0.1.0"
