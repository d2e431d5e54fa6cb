"""Regenerate data/corpus/cases.jsonl from the reference inputs.

Ground-truth contracts are produced by reconstruction and written once;
tests compare against the frozen file, so rerun this only when an input
or the registry changes on purpose.
"""

import json
from pathlib import Path

from moose_ifs.contract import contract_to_dict
from moose_ifs.hit import parse_input
from moose_ifs.reconstruct import active_children, reconstruct_contract
from moose_ifs.registry import default_registry

CORPUS = Path(__file__).resolve().parents[1] / "src" / "moose_ifs" / "data" / "corpus"

CASES = [
    ("thermal_001", "steady_heat", "simple",
     "A membrane separates two solutions. Hold the bottom face at concentration 1 and the top face "
     "at 0, take the diffusivity as uniform, and compute the steady concentration profile."),
    ("steady_heat_002", "steady_heat", "medium",
     "A 0.2 m by 0.1 m steel plate (conductivity 45 W/m/K) carries a uniform volumetric heat source "
     "of 1e4 W/m^3. The left edge stays at 300 K; the right edge loses heat by convection with "
     "h = 10 W/m^2/K to ambient air at 293 K. Find the steady temperature."),
    ("diffusion_004", "transient_heat", "medium",
     "A solute with diffusivity 0.1 m^2/s spreads through a unit square. Concentration on the left "
     "edge is zero and a constant influx of 1 mol/m^2/s enters through the right edge; the other edges "
     "are sealed. The domain starts empty. Run 2 s with a 0.1 s step."),
    ("transient_heat_005", "transient_heat", "simple",
     "A 0.5 m bar with conductivity 3.0 W/m/K, specific heat 450 J/kg/K and density 7800 kg/m^3 starts "
     "at 293 K. Its left end is ramped as 293 + 10 t K while the right end is insulated. Simulate 100 s."),
    ("framework_009", "transient_heat", "medium",
     "On a 1 m line, species v starts at 10, diffuses and decays with rate 0.5 1/s; v is 10 on the left "
     "and 0 on the right. Species u starts at 0, diffuses, and is produced at 0.5 times the local v. "
     "u is 0 on the left with no flux on the right. Simulate 3 s with dt 0.05 s."),
    ("coupled_007", "transient_heat", "complex",
     "Three species react in series A to B to C along a 10 cm tube. A (D = 1e-4) enters at 5 on the left "
     "and decays at 1 1/s into B. B (D = 5e-5) decays at 0.5 1/s into C. C (D = 2e-5) is held at 0 on "
     "the right. All other ends are no-flux. Simulate 1 s."),
    ("darcy_003", "th_porous", "simple",
     "Steady single-phase Darcy flow through a 0.3 m core with permeability 1e-12 m^2 and fluid "
     "viscosity 1e-3 Pa s. Inlet pressure is 1 MPa on the left, zero on the right."),
    ("th_porous_011", "th_porous", "medium",
     "Water at 1e5 Pa and 293 K saturates a 3 m by 1 m aquifer with porosity 0.2. Fluid at 2e5 Pa and "
     "350 K is injected on the left; on the right fluid is withdrawn at 1e-3 kg/m^2/s. Heat moves by "
     "conduction and with the fluid. Simulate 1000 s."),
    ("elasticity_001", "linear_elasticity", "simple",
     "A 1 m by 0.1 m steel strip (E = 200 GPa, nu = 0.3) is fixed horizontally on its left edge, held "
     "vertically on its left and bottom edges, and pulled by a 1 MPa traction on its right edge. "
     "Solve for the static displacement."),
    ("elastodynamics_006", "linear_elasticity", "complex",
     "An aluminium bar (E = 70 GPa, nu = 0.33, density 2700 kg/m^3) at rest is clamped on the left. "
     "The right end is displaced by 1 mm over the first 0.1 ms and held. Track the wave for 1 ms."),
    ("thm_porous_004", "thm_porous", "complex",
     "A 10 m saturated soil column (E = 1 GPa, nu = 0.25, porosity 0.3, Biot coefficient 0.8, fluid "
     "bulk modulus 2 GPa) at 293 K drains and is heated to 353 K at the top, which also carries a "
     "100 kPa load. Sides are rollers and the base is fixed. Simulate 1e5 s."),
    ("plasticity_002", "plasticity", "medium",
     "A unit square of steel (E = 210 GPa, nu = 0.3) with isotropic hardening (yield 250 MPa, "
     "hardening modulus 1 GPa) is stretched by moving its top edge at 1 mm/s while the left and "
     "bottom edges are on rollers. Simulate 1 s."),
    ("plasticity_008", "plasticity", "complex",
     "A 3D block of steel (E = 200 GPa, nu = 0.29, yield 285 MPa, hardening 1 GPa) sits on symmetry "
     "planes at its left, bottom and back faces, with 300 MPa pressure on the top face. Simulate 1 s "
     "in 10 steps with finite strain."),
    ("phase_field_001", "phase_field", "medium",
     "A circular grain of radius 30 in a periodic 100 by 100 box shrinks under a double-well free "
     "energy with mobility 1.0 and gradient energy coefficient 0.5. Simulate 50 time units."),
    ("phase_field_003", "phase_field", "complex",
     "Spinodal decomposition of a binary mixture with random initial composition between 0.45 and "
     "0.55 in a periodic 50 by 50 box, mobility 1.0, gradient coefficient 2.0, split formulation. "
     "Simulate 200 time units."),
    ("steady_heat_007", "steady_heat", "complex",
     "A scalar is carried at unit speed along a 4 m channel with diffusivity 0.01 and a uniform source "
     "of 2. It is zero at the inlet, leaves through a vacuum-type outlet with coefficient 2 and does "
     "not cross the walls. Find the steady field."),
    ("transient_heat_010", "transient_heat", "simple",
     "A unit rod starting at temperature 0 has its left end raised to 1 and its right end held at 0. "
     "Take 20 steps of 0.01 s with unit diffusivity."),
]


def kernel_variants(tree, registry) -> dict:
    out = {}
    for section in tree.root_blocks:
        if section.name != "Kernels":
            continue
        for kb in active_children(section):
            entry = registry.kernels.get(kb.block_type or "")
            if entry is not None:
                out[kb.block_type] = registry.equivalence_members(entry.equivalence_class)
    return out


def main() -> None:
    registry = default_registry()
    lines = []
    for case_id, family, tier, prompt in CASES:
        text = (CORPUS / "inputs" / f"{case_id}.i").read_text(encoding="utf-8")
        tree = parse_input(text)
        contract = reconstruct_contract(tree, registry)
        lines.append(json.dumps({
            "id": case_id,
            "family": family,
            "tier": tier,
            "prompt": prompt,
            "reference_input": f"inputs/{case_id}.i",
            "gt_contract": contract_to_dict(contract),
            "acceptable_kernel_variants": kernel_variants(tree, registry),
        }, sort_keys=True))
    (CORPUS / "cases.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {len(lines)} cases")


if __name__ == "__main__":
    main()
