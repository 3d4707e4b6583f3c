"""Knowledge audit framework: inventory, workflow, scoring and reporting for research project audits."""

__version__ = "0.1.0"
