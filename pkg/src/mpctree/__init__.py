"""Tree dynamic programming on a simulated memory-capped cluster.

The package is organized bottom-up:

- ``runtime``   -- deterministic round-synchronous cluster simulator
- ``hashing``   -- k-wise independent polynomial hash family, weighted balls-in-bins
- ``trees``     -- rooted tree container, text format, generators, sharding
- ``binarize``  -- degree bounding + binary extension (local and simulated)
- ``decompose`` -- random tree decomposition into O(m) components
- ``framework`` -- value algebra, symbolic partial tables, compress/merge
- ``polylog``   -- matching / MIS / vertex cover / dominating set / longest path
- ``partition`` -- first/second cut and the two-phase merge schedule
- ``linear``    -- minimum bisection and max-weight k-subtree on the schedule
- ``kmedian``   -- k-median / k-center curve DP on the binary extension
- ``geo``       -- closest pair and MST for points and sparse graphs
- ``oracles``   -- slow single-machine reference solvers
- ``cli``       -- ``mpctree gen|solve|stats``
"""

__version__ = "0.1.0"
