import itertools
from collections import namedtuple

import numpy as np
from scipy.stats import norm, rankdata, tiecorrect

from core.exceptions import ContractError

MannWhitneyResult = namedtuple('MannWhitneyResult', ['statistic', 'pvalue', 'method'])

EXACT_LIMIT = 12


def exact_pvalue(ranked, n_a, u_observed):
    mean = 0.5 * n_a * (len(ranked) - n_a)
    offset = n_a * (n_a + 1) / 2.0
    threshold = abs(u_observed - mean) - 1e-9
    extreme = total = 0
    # Перебор всех назначений рангов выборке A
    for combo in itertools.combinations(range(len(ranked)), n_a):
        u = ranked[list(combo)].sum() - offset
        total += 1
        if abs(u - mean) >= threshold:
            extreme += 1
    return extreme / total


def normal_pvalue(ranked, n_a, n_b, u_observed):
    sd = np.sqrt(tiecorrect(ranked) * n_a * n_b * (n_a + n_b + 1) / 12.0)
    if sd == 0:
        return 1.0
    z = (abs(u_observed - 0.5 * n_a * n_b) - 0.5) / sd
    return float(min(1.0, 2.0 * norm.sf(z)))


def mann_whitney_u(sample_a, sample_b, exact_limit=EXACT_LIMIT):
    a = np.asarray(sample_a, dtype=np.float64).ravel()
    b = np.asarray(sample_b, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise ContractError('both samples must be non-empty')
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise ContractError('samples must be finite')

    n_a, n_b = a.size, b.size
    ranked = rankdata(np.concatenate([a, b]))
    u_a = float(ranked[:n_a].sum() - n_a * (n_a + 1) / 2.0)
    if n_a + n_b <= exact_limit:
        return MannWhitneyResult(u_a, exact_pvalue(ranked, n_a, u_a), 'exact')
    return MannWhitneyResult(u_a, normal_pvalue(ranked, n_a, n_b, u_a), 'normal')
