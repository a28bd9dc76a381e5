"""codecausal: contamination-free code testbeds and causal evaluation of
LLM prompt treatments."""

__version__ = "0.1.0"
