import pytest

from wnv_impulse import ControlPolicy, Parameters

# figure scenarios; fig6 uses mu_m = 0.357, fig3/fig7/fig8 use 0.537
FIG3 = Parameters(mu_m=0.537, K_m=1000, delta_m=0.035, mu_b=0.01, c=0.09, beta_bm=0.8, N_b=400)
FIG4 = Parameters(mu_m=0.06, K_m=1000, delta_m=0.04, mu_b=0.01, c=0.09, beta_bm=0.8, N_b=400)
FIG5 = Parameters(mu_m=0.06, K_m=1000, delta_m=0.05, mu_b=0.01, c=0.09, beta_bm=0.8, N_b=400)
FIG6 = Parameters(mu_m=0.357, K_m=1000, delta_m=0.035, mu_b=0.01, c=0.09, beta_bm=0.8, N_b=400)

# documented parameter ranges; N_b has none, 1e2..1e4 here
TABLE1_RANGES = dict(
    mu_m=(0.036, 42.5),
    K_m=(1e5, 1e6),
    delta_m=(0.016, 0.07),
    mu_b=(1e-4, 1e-3),
    c=(0.09, 0.16),
    beta_bm=(0.8, 0.96),
    N_b=(1e2, 1e4),
)

FIG4_POLICY = ControlPolicy(p=0.8, q=0.3, H_b=250)
FIG5A_POLICY = ControlPolicy(p=0.8, q=0.25, H_b=250)
FIG6_POLICY = ControlPolicy(p=0.15, q=0.45, H_b=250)


@pytest.fixture
def fig6():
    return FIG6, FIG6_POLICY
