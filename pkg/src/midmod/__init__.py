"""Edge-level information diffusion modeling for online social networks.

Modules: ``graph`` (followership graph), ``eventlog`` (event records and
ingestion), ``simulator`` (synthetic networks and AsIC cascades),
``features`` (55-feature edge samples per time bin), ``blr`` (Bayesian
logistic regression), ``forest`` (random-forest feature ranking),
``evaluation`` (metrics and validation procedures), ``virality`` (crowdsourced
trending prediction) and ``cli``.
"""

__version__ = "0.1.0"
