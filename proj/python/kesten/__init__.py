"""Random difference equations R = M R + Q: tail index, shifted chain and tail readouts."""

from ._core import Model, __version__, audit, hill, lyapunov, run, sample_R, solve_kappa

__all__ = ["Model", "__version__", "audit", "hill", "lyapunov", "run", "sample_R", "solve_kappa"]
