"""Published Recall@20 / NDCG@20 figures used for side-by-side reporting.

Keys are dataset name, then method name; values are ``(recall, ndcg)``.
"""

PUBLISHED = {
    "gowalla": {
        "MF": (0.1291, 0.1109),
        "NeuMF": (0.1399, 0.1212),
        "NGCF": (0.157, 0.1327),
        "Mult-VAE": (0.1641, 0.1335),
        "GRMF": (0.1477, 0.1205),
        "LightGCN": (0.183, 0.1554),
        "SSB (512)": (0.169, 0.1401),
        "TSA (1024)": (0.1704, 0.1415),
    },
    "yelp2018": {
        "MF": (0.0433, 0.0354),
        "NeuMF": (0.0451, 0.0363),
        "NGCF": (0.0579, 0.0477),
        "Mult-VAE": (0.0584, 0.0450),
        "GRMF": (0.0571, 0.0462),
        "LightGCN": (0.0649, 0.0530),
        "SSB (512)": (0.0647, 0.0534),
        "TSA (1024)": (0.0657, 0.0542),
    },
    "amazon-book": {
        "MF": (0.0250, 0.0196),
        "NeuMF": (0.0258, 0.0200),
        "NGCF": (0.0344, 0.0263),
        "Mult-VAE": (0.0407, 0.0315),
        "GRMF": (0.0354, 0.0270),
        "LightGCN": (0.0411, 0.0315),
        "SSB (512)": (0.0408, 0.0325),
        "TSA (1024)": (0.0456, 0.0364),
    },
}

# users, items, interactions (train + test)
DATASET_STATS = {
    "gowalla": (29858, 40981, 1027370),
    "yelp2018": (31688, 38048, 1561406),
    "amazon-book": (52643, 91599, 2984108),
}

# Yelp2018 training-side figures: loss, train recall, train NDCG, SVD seconds
YELP_TRAINING = {
    "ssb": {"loss": 0.04477, "recall": 0.14736, "ndcg": 0.25875, "svd_seconds": 21.83},
    "tsa": {"loss": 0.03847, "recall": 0.16262, "ndcg": 0.28243, "svd_seconds": 503.04},
}


def guess_dataset(path) -> str | None:
    """Match a known dataset name inside a file path (case-insensitive)."""
    text = str(path).lower().replace("_", "-")
    for name, needle in (("gowalla", "gowalla"), ("yelp2018", "yelp"), ("amazon-book", "amazon")):
        if needle in text:
            return name
    return None
