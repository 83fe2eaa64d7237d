"""Multi-identifier network workbench.

Subsystems: hierarchical content names and identifier variants (`names`),
the hash-plus-prefix-tree forwarding table (`hpt`), the vote-based
consortium consensus core (`apov`) and its deterministic virtual-time
simulator (`simulate`), the analytic round-time/throughput model
(`perfmodel`), the IP-over-CCN tunnel (`tunnel`), the hierarchical
identifier registry (`registry`), and the synthetic workload generator
(`workload`).  The `minet` console script exposes benchmarks and demos.
"""

__version__ = "0.1.0"
