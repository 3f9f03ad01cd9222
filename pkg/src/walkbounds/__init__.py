"""Numerical verification of Mond-Pecaric tensor inequalities and random-walk tail bounds."""

__version__ = "0.1.0"
