"""Mixed finite elements and variable-step DLN time stepping for Allen-Cahn active fluids."""

__version__ = "0.1.0"
