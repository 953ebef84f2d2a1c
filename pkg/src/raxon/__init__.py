"""Characteristic-set RDF store."""
