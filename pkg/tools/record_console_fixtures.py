"""Record real service responses into the console's contract fixtures.

Drives the FastAPI app in-process through the committee replay and
captures the wire bodies the console tests assert against. Rerun after
any API change:

    python3 tools/record_console_fixtures.py
"""

import json
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from clad.demo import demo_cases, demo_model, demo_votes
from clad.model_io import save_model
from clad.service import ModelRegistry, SessionStore, create_app

OUT = Path(__file__).resolve().parent.parent / "frontend" / "tests" / "fixtures" / "october.json"


def main() -> None:
    tmp = Path(tempfile.mkdtemp(prefix="clad-fixtures-"))
    models_dir = tmp / "models"
    models_dir.mkdir()
    save_model(demo_model(), models_dir / "reviewer.json")
    cases = {rec.record_id: rec for rec in demo_cases().records}
    app = create_app(
        store=SessionStore(tmp / "store"),
        registry=ModelRegistry(models_dir),
        cases=cases,
        mr=0.05,
        admin_cost=10.0,
        fp_variant="full_limit",
        token="console-test-token",
    )
    client = TestClient(app)
    headers = {"X-API-Token": "console-test-token"}

    session = client.post(
        "/sessions",
        json={"alpha": 0.2, "model": "reviewer", "case_ids": list(cases)},
        headers=headers,
    ).json()
    sid = session["session_id"]

    queue = client.get(f"/sessions/{sid}/queue", headers=headers).json()
    whatif_same = client.get(f"/sessions/{sid}/whatif", params={"alpha": 0.2}, headers=headers).json()
    whatif_zero = client.get(f"/sessions/{sid}/whatif", params={"alpha": 0.0}, headers=headers).json()

    votes = demo_votes()
    first_id = next(iter(votes))
    first_decision = client.post(
        f"/sessions/{sid}/decisions",
        json={"record_id": first_id, "decision": votes[first_id]},
        headers=headers,
    ).json()
    conflict = client.post(
        f"/sessions/{sid}/decisions",
        json={"record_id": first_id, "decision": 0},
        headers=headers,
    )
    agreement_first = client.get(f"/sessions/{sid}/agreement", headers=headers).json()

    for record_id, vote in list(votes.items())[1:]:
        resp = client.post(
            f"/sessions/{sid}/decisions",
            json={"record_id": record_id, "decision": vote},
            headers=headers,
        )
        assert resp.status_code == 201, resp.text
    agreement_final = client.get(f"/sessions/{sid}/agreement", headers=headers).json()
    session_after = client.get(f"/sessions/{sid}", headers=headers).json()

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(
        json.dumps(
            {
                "session": session,
                "queue": queue,
                "votes": votes,
                "whatif_same_alpha": whatif_same,
                "whatif_zero_alpha": whatif_zero,
                "first_decision": first_decision,
                "conflict": {"status": conflict.status_code, "body": conflict.json()},
                "agreement_after_first": agreement_first,
                "agreement_final": agreement_final,
                "session_final": session_after,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    print(f"wrote {OUT} (kappa={agreement_final['kappa']:.4f})")


if __name__ == "__main__":
    main()
