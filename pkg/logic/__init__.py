"""
Closed-form checks for the ridge simulator.

* `spectral_bounds`: maxima of the filter h(λ, α) and its sensitivity g(λ, α)
  over the spectrum window, with grid-search counterparts.
* `fold_bounds`: Weyl fold intervals, the P_w floor, per-fold ‖w_l‖ and the
  good-fit P1/P2 bounds, rank over κ².
* `cost_models`: abstract query-complexity models reported next to the
  measured oracle counters.

Every check returns a `bound_report.BoundReport` and never raises on a
violated bound.
"""
