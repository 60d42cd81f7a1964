"""clipsmith: extractive highlight-clip generation for long videos."""

__version__ = "0.1.0"
