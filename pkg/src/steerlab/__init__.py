"""Mixed states with mutual pure-state steering: Bell functionals, classical
bounds, steering tests and protocol simulations for small qubit systems."""

__version__ = "0.1.0"
