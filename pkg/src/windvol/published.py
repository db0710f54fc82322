"""Published reference values used for side-by-side comparison in reproduce runs."""

from __future__ import annotations

DESCRIPTIVE = {
    "ws10": {"T": 2192, "N": 141, "Median": 1.313, "Mean": 1.475, "IQR": 0.717, "SD": 0.689, "min": 0.2309, "max": 7.036},
    "ws100": {"T": 2192, "N": 141, "Median": 2.245, "Mean": 2.584, "IQR": 1.484, "SD": 1.318, "min": 0.4357, "max": 13.050},
}

# EGARCH share preferred over GARCH, percent
IC_PREFERENCE = {
    "ws10": {"aic": 96.45, "bic": 87.23},
    "ws100": {"aic": 91.48, "bic": 76.59},
}

# Moran's I and z of station means (mean) and station mean squares (mean_sq)
MORAN = {
    ("distance", "mean", "ws10"): (0.404, 17.29),
    ("distance", "mean", "ws100"): (0.454, 19.43),
    ("distance", "mean_sq", "ws10"): (0.552, 23.52),
    ("distance", "mean_sq", "ws100"): (0.587, 25.00),
    ("knn", "mean", "ws10"): (0.747, 16.23),
    ("knn", "mean", "ws100"): (0.759, 16.53),
    ("knn", "mean_sq", "ws10"): (0.887, 19.21),
    ("knn", "mean_sq", "ws100"): (0.849, 18.44),
    ("directional", "mean", "ws10"): (0.319, 11.95),
    ("directional", "mean", "ws100"): (0.362, 12.43),
    ("directional", "mean_sq", "ws10"): (0.656, 24.29),
    ("directional", "mean_sq", "ws100"): (0.685, 23.24),
}

_ST_ORDER = ("mu", "phi", "theta", "omega", "alpha", "beta")


def _st(values):
    return dict(zip(_ST_ORDER, values))


# joint model estimates keyed by (weight, source, height)
STARMAGARCH = {
    ("distance", "ar1", "ws10"): _st((-0.0061, -0.5969, 0.6601, 0.0962, 0.2040, 0.5018)),
    ("distance", "ar1", "ws100"): _st((-0.0227, -0.4636, 0.5506, 0.0998, 0.1289, 0.7934)),
    ("distance", "sdpd", "ws10"): _st((0.0020, -0.0945, 0.2317, 0.0200, 0.2858, 0.4278)),
    ("distance", "sdpd", "ws100"): _st((-0.0032, 0.0409, 0.1862, 0.0060, 0.1422, 0.8800)),
    ("knn", "ar1", "ws10"): _st((0.0033, -0.6084, 0.6557, 0.0037, 0.1012, 0.8952)),
    ("knn", "ar1", "ws100"): _st((-0.0190, -0.5975, 0.6589, 0.0252, 0.0796, 0.9040)),
    ("knn", "sdpd", "ws10"): _st((0.0041, 0.3001, -0.4447, 0.0010, 0.2434, 0.7369)),
    ("knn", "sdpd", "ws100"): _st((0.0075, 0.4043, -0.5411, 0.0009, 0.1293, 0.8620)),
    ("directional", "ar1", "ws10"): _st((-0.0093, -0.6799, 0.7358, 0.2545, 0.2247, 0.0000)),
    ("directional", "ar1", "ws100"): _st((-0.0299, -0.4365, 0.5225, 0.9979, 0.2215, 0.0000)),
    ("directional", "sdpd", "ws10"): _st((0.0155, 0.6572, -0.7505, 0.1160, 0.0359, 0.0000)),
    ("directional", "sdpd", "ws100"): _st((0.0263, 0.5948, -0.6837, 0.3693, 0.0273, 0.0000)),
}

# pass rates (percent): (ljung_box_res, ljung_box_sq, moran_res, moran_sq)
RESIDUAL_PASS_RATES = {
    ("distance", "ar1", "ws10"): (88.65, 81.56, 0.05, 0.27),
    ("distance", "ar1", "ws100"): (88.65, 88.65, 0.00, 0.11),
    ("distance", "sdpd", "ws10"): (31.21, 80.85, 22.66, 6.33),
    ("distance", "sdpd", "ws100"): (24.11, 77.30, 7.76, 5.67),
    ("knn", "ar1", "ws10"): (96.45, 92.91, 0.00, 0.00),
    ("knn", "ar1", "ws100"): (92.20, 89.36, 0.00, 0.05),
    ("knn", "sdpd", "ws10"): (31.91, 81.56, 64.69, 8.75),
    ("knn", "sdpd", "ws100"): (27.66, 77.30, 76.84, 5.28),
    ("directional", "ar1", "ws10"): (75.18, 60.99, 0.44, 5.04),
    ("directional", "ar1", "ws100"): (76.60, 24.82, 0.60, 5.91),
    ("directional", "sdpd", "ws10"): (30.50, 26.24, 62.71, 53.91),
    ("directional", "sdpd", "ws100"): (14.18, 9.22, 73.27, 54.57),
}

# (rmsfe, mafe) keyed by (model, weight, proxy, height)
FORECAST = {
    ("st_ar1", "distance", "rv", "ws10"): (3.3087, 2.4997),
    ("st_ar1", "distance", "rv", "ws100"): (3.1213, 2.3122),
    ("st_ar1", "distance", "ewma", "ws10"): (1.0356, 0.7639),
    ("st_ar1", "distance", "ewma", "ws100"): (0.7142, 0.5362),
    ("st_ar1", "knn", "rv", "ws10"): (3.1109, 2.3060),
    ("st_ar1", "knn", "rv", "ws100"): (3.0482, 2.2410),
    ("st_ar1", "knn", "ewma", "ws10"): (0.6464, 0.4431),
    ("st_ar1", "knn", "ewma", "ws100"): (0.5268, 0.3721),
    ("st_ar1", "directional", "rv", "ws10"): (3.3673, 2.5570),
    ("st_ar1", "directional", "rv", "ws100"): (3.2275, 2.4164),
    ("st_ar1", "directional", "ewma", "ws10"): (1.1142, 0.8353),
    ("st_ar1", "directional", "ewma", "ws100"): (0.8965, 0.7053),
    ("st_sdpd", "distance", "rv", "ws10"): (3.0107, 2.1927),
    ("st_sdpd", "distance", "rv", "ws100"): (3.0639, 2.2470),
    ("st_sdpd", "distance", "ewma", "ws10"): (0.7198, 0.5622),
    ("st_sdpd", "distance", "ewma", "ws100"): (0.6756, 0.5299),
    ("st_sdpd", "knn", "rv", "ws10"): (3.2356, 2.4216),
    ("st_sdpd", "knn", "rv", "ws100"): (3.3321, 2.5130),
    ("st_sdpd", "knn", "ewma", "ws10"): (0.9610, 0.7766),
    ("st_sdpd", "knn", "ewma", "ws100"): (0.9966, 0.8099),
    ("st_sdpd", "directional", "rv", "ws10"): (3.3072, 2.4944),
    ("st_sdpd", "directional", "rv", "ws100"): (3.2930, 2.4989),
    ("st_sdpd", "directional", "ewma", "ws10"): (1.0315, 0.8120),
    ("st_sdpd", "directional", "ewma", "ws100"): (1.0275, 0.8484),
    ("uni_garch", "-", "rv", "ws10"): (3.1009, 2.3020),
    ("uni_garch", "-", "rv", "ws100"): (3.0429, 2.2382),
    ("uni_garch", "-", "ewma", "ws10"): (0.5361, 0.4399),
    ("uni_garch", "-", "ewma", "ws100"): (0.4603, 0.3619),
    ("uni_egarch", "-", "rv", "ws10"): (3.1202, 2.3203),
    ("uni_egarch", "-", "rv", "ws100"): (3.0976, 2.2933),
    ("uni_egarch", "-", "ewma", "ws10"): (0.5904, 0.4905),
    ("uni_egarch", "-", "ewma", "ws100"): (0.5768, 0.4708),
}

# two-height model: weight -> parameter label -> (estimate, standard error)
MULTIVARIATE = {
    "distance": {
        "beta_mu_1": (-0.134, 0.002), "beta_mu_2": (-0.333, 0.002),
        "Psi_mu_11": (0.906, 0.004), "Psi_mu_22": (0.848, 0.002),
        "Psi_mu_12": (0.011, 0.002), "Psi_mu_21": (0.307, 0.004),
        "Pi_mu_11": (0.288, 0.003), "Pi_mu_22": (0.035, 0.001),
        "Pi_mu_12": (-0.079, 0.001), "Pi_mu_21": (0.101, 0.003),
        "A_1": (-0.835, 0.017), "A_2": (-0.372, 0.019),
        "Psi_sigma_11": (0.558, 0.004), "Psi_sigma_22": (0.577, 0.004),
        "Psi_sigma_12": (0.163, 0.005), "Psi_sigma_21": (0.135, 0.006),
        "Pi_sigma_11": (0.067, 0.002), "Pi_sigma_22": (0.113, 0.002),
        "Pi_sigma_12": (0.054, 0.002), "Pi_sigma_21": (0.022, 0.002),
    },
    "knn": {
        "beta_mu_1": (0.007, 0.001), "beta_mu_2": (-0.063, 0.001),
        "Psi_mu_11": (0.798, 0.002), "Psi_mu_22": (0.890, 0.001),
        "Psi_mu_12": (0.072, 0.001), "Psi_mu_21": (0.166, 0.003),
        "Pi_mu_11": (0.152, 0.002), "Pi_mu_22": (0.051, 0.001),
        "Pi_mu_12": (-0.047, 0.001), "Pi_mu_21": (-0.022, 0.002),
        "A_1": (-1.432, 0.022), "A_2": (-0.859, 0.026),
        "Psi_sigma_11": (0.466, 0.003), "Psi_sigma_22": (0.454, 0.003),
        "Psi_sigma_12": (0.122, 0.006), "Psi_sigma_21": (0.116, 0.006),
        "Pi_sigma_11": (0.107, 0.002), "Pi_sigma_22": (0.171, 0.002),
        "Pi_sigma_12": (0.066, 0.002), "Pi_sigma_21": (0.053, 0.002),
    },
    "directional": {
        "beta_mu_1": (0.172, 0.003), "beta_mu_2": (0.310, 0.004),
        "Psi_mu_11": (0.374, 0.005), "Psi_mu_22": (0.932, 0.003),
        "Psi_mu_12": (0.159, 0.003), "Psi_mu_21": (-0.480, 0.006),
        "Pi_mu_11": (0.338, 0.005), "Pi_mu_22": (0.147, 0.002),
        "Pi_mu_12": (-0.049, 0.002), "Pi_mu_21": (0.162, 0.005),
        "A_1": (-1.072, 0.011), "A_2": (-0.325, 0.012),
        "Psi_sigma_11": (0.535, 0.004), "Psi_sigma_22": (0.519, 0.004),
        "Psi_sigma_12": (0.108, 0.004), "Psi_sigma_21": (0.166, 0.004),
        "Pi_sigma_11": (0.113, 0.002), "Pi_sigma_22": (0.085, 0.002),
        "Pi_sigma_12": (0.050, 0.002), "Pi_sigma_21": (0.065, 0.002),
    },
}
