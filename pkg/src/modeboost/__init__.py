"""Edge-ready shared micro-mobility demand forecasting.

Library layout:

* ``core``        demand panels, time grids, chronological splits
* ``ingest``      snapshot/trip/holiday parsing, cleaning, synthetic data
* ``features``    causal per-entity feature extraction and matrix assembly
* ``labeling``    Low/Medium/High demand classes and forecast targets
* ``postprocess`` pooled normalization and entity encoding
* ``gbtree``      Newton-boosted tree training, prediction, persistence
* ``baselines``   historical average, seasonal naive, SES, Croston
* ``evaluate``    metrics, significance tests, comparison harnesses
* ``tune``        TPE search with median pruning, coarse-to-fine phases
* ``bench``       inference latency and memory-footprint measurement
* ``cli``         the ``modeboost`` command
"""

__version__ = "0.1.0"
