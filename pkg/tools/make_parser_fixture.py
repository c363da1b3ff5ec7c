"""Regenerate tests/data/parser_fixture.json using RDKit as the reference.

Each input is canonicalized by RDKit (aromatic form, stereo dropped) and the
resulting SMILES is re-read by RDKit to record atom order, bond count,
per-atom total hydrogen count and aromatic flags, and which bonds are
conjugated.

    python tools/make_parser_fixture.py
"""

import json
from pathlib import Path

from rdkit import Chem

DRUGS = {
    "aspirin": "CC(=O)Oc1ccccc1C(=O)O",
    "paracetamol": "CC(=O)Nc1ccc(O)cc1",
    "ibuprofen": "CC(C)Cc1ccc(cc1)C(C)C(=O)O",
    "caffeine": "Cn1cnc2c1c(=O)n(C)c(=O)n2C",
    "nicotine": "CN1CCCC1c1cccnc1",
    "diazepam": "CN1C(=O)CN=C(c2ccccc2)c2cc(Cl)ccc21",
    "fluoxetine": "CNCCC(Oc1ccc(cc1)C(F)(F)F)c1ccccc1",
    "sertraline": "CNC1CCC(c2ccc(Cl)c(Cl)c2)c2ccccc21",
    "metformin": "CN(C)C(=N)N=C(N)N",
    "sildenafil": "CCCc1nn(C)c2c1nc([nH]c2=O)-c1cc(ccc1OCC)S(=O)(=O)N1CCN(C)CC1",
    "omeprazole": "COc1ccc2[nH]c(nc2c1)S(=O)Cc1ncc(C)c(OC)c1C",
    "atorvastatin_core": "CC(C)c1c(C(=O)Nc2ccccc2)c(-c2ccccc2)c(-c2ccc(F)cc2)n1CCC(O)CC(O)CC(=O)O",
    "celecoxib": "Cc1ccc(cc1)-c1cc(nn1-c1ccc(cc1)S(N)(=O)=O)C(F)(F)F",
    "lidocaine": "CCN(CC)CC(=O)Nc1c(C)cccc1C",
    "propranolol": "CC(C)NCC(O)COc1cccc2ccccc12",
    "warfarin": "CC(=O)CC(c1ccccc1)c1c(O)c2ccccc2oc1=O",
    "ciprofloxacin": "OC(=O)c1cn(C2CC2)c2cc(N3CCNCC3)c(F)cc2c1=O",
    "chloroquine": "CCN(CC)CCCC(C)Nc1ccnc2cc(Cl)ccc12",
    "haloperidol": "OC1(CCN(CCCC(=O)c2ccc(F)cc2)CC1)c1ccc(Cl)cc1",
    "loratadine": "CCOC(=O)N1CCC(=C2c3ccc(Cl)cc3CCc3cccnc32)CC1",
    "verapamil": "COc1ccc(CCN(C)CCCC(C#N)(C(C)C)c2ccc(OC)c(OC)c2)cc1OC",
    "tamoxifen": "CCC(=C(c1ccccc1)c1ccc(OCCN(C)C)cc1)c1ccccc1",
    "ketoconazole_frag": "CC(=O)N1CCN(CC1)c1ccc(OC)cc1",
    "furosemide": "NS(=O)(=O)c1cc(C(=O)O)c(NCc2ccco2)cc1Cl",
    "hydrochlorothiazide": "NS(=O)(=O)c1cc2c(cc1Cl)NCNS2(=O)=O",
    "captopril": "CC(CS)C(=O)N1CCCC1C(=O)O",
    "amlodipine": "CCOC(=O)C1=C(COCCN)NC(C)=C(C(=O)OC)C1c1ccccc1Cl",
    "clopidogrel": "COC(=O)C(c1ccccc1Cl)N1CCc2sccc2C1",
    "imatinib": "Cc1ccc(NC(=O)c2ccc(CN3CCN(C)CC3)cc2)cc1Nc1nccc(-c2cccnc2)n1",
    "gefitinib": "COc1cc2ncnc(Nc3ccc(F)c(Cl)c3)c2cc1OCCCN1CCOCC1",
    "theophylline": "Cn1c2nc[nH]c2c(=O)n(C)c1=O",
    "indomethacin": "COc1ccc2n(C(=O)c3ccc(Cl)cc3)c(C)c(CC(=O)O)c2c1",
    "naproxen": "COc1ccc2cc(C(C)C(=O)O)ccc2c1",
    "tolbutamide": "CCCCNC(=O)NS(=O)(=O)c1ccc(C)cc1",
    "zolpidem": "CN(C)C(=O)Cc1c(-c2ccc(C)cc2)nc2ccc(C)cn12",
    "phenytoin": "O=C1NC(=O)C(c2ccccc2)(c2ccccc2)N1",
    "carbamazepine": "NC(=O)N1c2ccccc2C=Cc2ccccc21",
    "trimethoprim": "COc1cc(Cc2cnc(N)nc2N)cc(OC)c1OC",
    "sulfamethoxazole": "Cc1cc(NS(=O)(=O)c2ccc(N)cc2)no1",
    "metronidazole": "Cc1ncc([N+](=O)[O-])n1CCO",
    "nitrofurantoin": "O=C1CN(N=Cc2ccc(o2)[N+](=O)[O-])C(=O)N1",
    "isoniazid": "NNC(=O)c1ccncc1",
    "dapsone": "Nc1ccc(cc1)S(=O)(=O)c1ccc(N)cc1",
    "benzothiophene_amide": "O=C(NCc1ccccc1)c1cc2ccccc2s1",
    "thiazole_amine": "Nc1nc(cs1)-c1ccc(Br)cc1",
    "indole_acid": "OC(=O)Cc1c[nH]c2ccccc12",
    "quaternary_ammonium": "C[N+](C)(C)CCOC(C)=O",
    "phosphate_ester": "CCOP(=O)(OCC)OCC",
    "alkyne_iodo": "C#CCOc1ccc(I)cc1",
    "boronic_acid": "OB(O)c1ccccc1",
}


def record(name, smi):
    canon = Chem.MolToSmiles(Chem.MolFromSmiles(smi), isomericSmiles=False)
    mol = Chem.MolFromSmiles(canon)
    return {
        "name": name,
        "smiles": canon,
        "num_atoms": mol.GetNumAtoms(),
        "num_bonds": mol.GetNumBonds(),
        "hydrogens": [a.GetTotalNumHs() for a in mol.GetAtoms()],
        "aromatic": [a.GetIsAromatic() for a in mol.GetAtoms()],
        "conjugated_bonds": sorted(
            [min(b.GetBeginAtomIdx(), b.GetEndAtomIdx()), max(b.GetBeginAtomIdx(), b.GetEndAtomIdx())]
            for b in mol.GetBonds() if b.GetIsConjugated()
        ),
    }


def main():
    rows = [record(k, v) for k, v in DRUGS.items()]
    assert len(rows) >= 50, len(rows)
    out = Path(__file__).resolve().parents[1] / "tests" / "data" / "parser_fixture.json"
    out.write_text(json.dumps({"reference": "rdkit", "molecules": rows}, indent=1) + "\n")
    print(f"wrote {len(rows)} molecules to {out}")


if __name__ == "__main__":
    main()
