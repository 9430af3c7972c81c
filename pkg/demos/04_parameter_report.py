"""Parameter budget of the Sidecar next to the frozen backbone.

Prints the toy configuration used in tests and the full-size one, and how
the count grows when a third speaker is added.
"""

import json

from sidecar_mtl.backbone import BackboneConfig
from sidecar_mtl.sidecar import SidecarConfig, param_report

for name, bb, sc in [
    ("toy", BackboneConfig(), SidecarConfig.toy()),
    ("paper", BackboneConfig.paper_scale(), SidecarConfig()),
]:
    report = param_report(sc, bb)
    print(f"== {name} scale")
    print(json.dumps(report, indent=2))

two = param_report(SidecarConfig(n_speakers=2), BackboneConfig.paper_scale())
three = param_report(SidecarConfig(n_speakers=3), BackboneConfig.paper_scale())
print("extra parameters for a third speaker:", three["trainable"] - two["trainable"])
