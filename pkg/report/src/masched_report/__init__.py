"""Renders results CSVs produced by the masched analysis commands into
SVG charts and a Markdown summary. Consumes only the CSV contract; no
statistics are recomputed here.
"""

__version__ = "0.1.0"
