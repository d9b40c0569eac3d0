"""Drive the trial-conduct service through a scripted CRM trial.

Uses the in-process test client, so no server needs to be running.  The
script replays a famous single-dose-heavy trajectory: one unplanned
patient at d1, a clean cohort at d2, then every remaining cohort at d3,
and prints the recommendation and fitted curve after each step.
"""

import tempfile

from fastapi.testclient import TestClient

from dosefind.service import create_app

CONFIG = {
    "design": {
        "design": "crm",
        "skeleton": [0.05, 0.20, 0.40, 0.80],
        "prior": {"mu": 0.0, "sigma": 1.8 ** 0.5},
        "cohort_size": 3,
    },
    "levels": 4,
    "target": 0.3,
    "start_level": 1,
    "label": "scripted replay",
}

COHORTS = [(1, 1, 0), (2, 3, 0)] + [(3, 3, d) for d in (1, 1, 1, 1, 1, 1, 1)] \
    + [(3, 2, 0)]

with tempfile.TemporaryDirectory() as tmp:
    client = TestClient(create_app(tmp))
    created = client.post("/trials", json=CONFIG).json()
    tid = created["id"]
    print(f"trial {tid} created, first recommendation: d{created['recommendation']}")
    for level, size, dlts in COHORTS:
        body = client.post(
            f"/trials/{tid}/cohorts",
            json={"level": level, "size": size, "dlt_count": dlts}).json()
        curve = body["diagnostics"]["curve"]
        ghat = " ".join(f"{v:.2f}" for v in curve["g_hat"])
        flag = " (override)" if body["diagnostics"]["override"] else ""
        print(f"  treated d{level} {dlts}/{size}{flag}  ->  next d"
              f"{body['recommendation']}   posterior curve: {ghat}")
    snap = client.get(f"/trials/{tid}").json()
    tallies = snap["state"]["n_patients"]
    print(f"\nfinal recommendation d{snap['recommendation']}; "
          f"patients per level: {tallies}")
