"""medtab: turn free-text medical reports into validated tables with an LLM,
then train and evaluate interpretable classifiers on them."""

__version__ = "0.1.0"
