"""kbagym: a desk-scale agentic knowledge-base QA environment and training-signal toolkit."""

__version__ = "0.1.0"
