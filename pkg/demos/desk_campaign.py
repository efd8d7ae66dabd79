"""A desk-sized ball campaign with toy constants, checkpointed and resumed.

The constant c is far below its proven value, so the verdict says nothing
about Navier-Stokes; the run exercises the pipeline end to end.
"""

import os
import tempfile

from enstrophy_cert.campaign import CampaignConfig, verify_ball_h2
from enstrophy_cert.constants import ConstantsLedger

with tempfile.TemporaryDirectory() as tmp:
    cfg = CampaignConfig(
        K=2,
        dt=1e-2,
        ledger=ConstantsLedger(c_const=0.01),
        pilot_samples=4,
        delta_override=2.5,
        lattice_rule="coordinate",
        small_data_shortcut=False,
        checkpoint_path=os.path.join(tmp, "ball.ckpt"),
        workers=2,
    )
    state = verify_ball_h2(1.2, cfg)
    print(f"lattice N={state.lattice.N} M={state.lattice.M}, {state.count} points")
    print("summary:", state.summary(), "->", state.verdict)
    again = verify_ball_h2(1.2, cfg)
    print("resumed report identical:", again.to_json() == state.to_json())
