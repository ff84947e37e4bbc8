"""byzlab: a deterministic desk-scale laboratory for Byzantine-robust
federated learning.

Layers, bottom up:

* ``byzlab.crypto``: prime-order group arithmetic, extended Pedersen
  commitments, bit-decomposition range proofs.
* ``byzlab.secagg``: pairwise additive masking with commitment-audited
  unmasking.
* ``byzlab.model``: fixed-point parameter vectors, synthetic data with
  a tail subpopulation, exact-gradient training.
* ``byzlab.aggregators``: FedAvg, norm-bound filters (static and
  median-dynamic), Multi-Krum, coordinate median, trimmed mean,
  FoolsGold.
* ``byzlab.attacks``: poisoning strategies, Sybil identities, clone
  diversification, dynamic-bound manipulation.
* ``byzlab.sim``: scenario configs, the round engine, metrics, round
  transcripts, and the CLI.
"""

__version__ = "0.1.0"
