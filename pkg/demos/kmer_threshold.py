"""Pick the solid k-mer threshold on a synthetic error/genome count mixture.

Error k-mers follow Poisson(2) and genomic ones Poisson(60).  The density
valley between the modes should land well clear of both.
"""

import numpy as np

from quasiflow.kspectrum import KmerSpectrum, kde_threshold

rng = np.random.default_rng(0)
counts = np.concatenate([rng.poisson(2, 100_000), rng.poisson(60, 1_000)])
counts = counts[counts > 0]
spec = KmerSpectrum(21, {f"k{i}": int(c) for i, c in enumerate(counts)})

for oversmooth in (1.0, 1.5, 2.0):
    curve, t = kde_threshold(spec, oversmooth)
    below = int((counts < t).sum())
    print(f"oversmooth {oversmooth:>3}: t = {t:>2}, {below} k-mers discarded, "
          f"{len(counts) - below} kept")
