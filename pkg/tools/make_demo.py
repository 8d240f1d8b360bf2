"""Regenerate the demo benchmark suite under demo/.

Scripted mock responses are laid out so the summary is hand-checkable:

bbb_class (25 examples, 3 repetitions):
  0-19: every repetition answers the truth          -> correct
  20-23: majority answers the wrong label           -> incorrect
  24:   all repetitions lack an answer block        -> invalid aggregate
  accuracy = 20/25 = 0.80; Val = 72/75 = 0.96

logp_reg (25 examples, 3 repetitions, truth v):
  0-9:   [v, v, v]                 -> median v,      error 0.0
  10-19: [v+0.5, v-0.1, v+0.1]     -> median v+0.1,  error 0.1
  20-23: [v+1.0, v+2.0, invalid]   -> median v+1.5,  error 1.5
  24:    [invalid, invalid, v+2.0] -> median v+2.0,  error 2.0
  MAE = (10*0 + 10*0.1 + 4*1.5 + 2.0)/25 = 0.36; Val = 69/75 = 0.92
"""

import json
from pathlib import Path

DEMO = Path(__file__).resolve().parent.parent / "demo"

MOLECULES = [
    "CCO", "CC(=O)O", "c1ccccc1", "CCN", "CC(C)O", "CCC(=O)O", "c1ccncc1",
    "CC(=O)OC", "CCOC", "CCS", "CC(C)C", "CCCl", "c1ccoc1", "CC(N)C(=O)O",
    "CCCO", "CC(=O)N", "c1ccsc1", "CCBr", "CC(C)N", "CCCC", "CC(=O)CC",
    "c1cc[nH]c1", "CCI", "CC(O)CC", "OCC(O)CO",
]

CLASS_TRUTHS = [("True" if i % 2 == 0 else "False") for i in range(25)]
REG_TRUTHS = [round(-1.0 + 0.25 * i, 2) for i in range(25)]


def think(text: str) -> str:
    return f"<think>{text}</think>"


def answer(text: str) -> str:
    return f"<answer>{text}</answer>"


def main():
    tasks_dir = DEMO / "tasks"
    tasks_dir.mkdir(parents=True, exist_ok=True)

    class_templates = [
        "Does the molecule {mol} cross the blood-brain barrier? Reply True or False.",
        "Predict blood-brain barrier penetration for {mol}. Answer True or False.",
        "Is {mol} brain-penetrant? Answer with True or False only.",
    ]
    with open(tasks_dir / "bbb_class.jsonl", "w") as fh:
        for i, (smiles, truth) in enumerate(zip(MOLECULES, CLASS_TRUTHS)):
            fh.write(json.dumps({
                "category": "mol_2d",
                "task_id": "bbb_class",
                "prompt_templates": class_templates,
                "entities": {"mol": {"format": "smiles", "value": smiles}},
                "answer": {"label": truth},
                "answer_type": {"kind": "classification", "labels": ["True", "False"]},
            }) + "\n")

    reg_templates = [
        "Estimate the logP of {mol}. Reply with a number.",
        "What is the octanol-water partition coefficient of {mol}?",
    ]
    with open(tasks_dir / "logp_reg.jsonl", "w") as fh:
        for smiles, truth in zip(MOLECULES, REG_TRUTHS):
            fh.write(json.dumps({
                "category": "mol_2d",
                "task_id": "logp_reg",
                "prompt_templates": reg_templates,
                "entities": {"mol": {"format": "smiles", "value": smiles}},
                "answer": {"value": str(truth)},
                "answer_type": {"kind": "regression", "range": [-2.0, 6.0]},
            }) + "\n")

    with open(DEMO / "manifest.yaml", "w") as fh:
        fh.write(
            "categories: [mol_2d]\n"
            "tasks:\n"
            "  mol_2d:\n"
            "    bbb_class: tasks/bbb_class.jsonl\n"
            "    logp_reg: tasks/logp_reg.jsonl\n"
        )

    def wrong(label: str) -> str:
        return "False" if label == "True" else "True"

    with open(DEMO / "responses.jsonl", "w") as fh:
        for i, truth in enumerate(CLASS_TRUTHS):
            if i < 20:
                completions = [think("reasoning") + answer(truth)] * 3
            elif i < 24:
                completions = [
                    think("hmm") + answer(wrong(truth)),
                    think("hmm") + answer(wrong(truth)),
                    think("hmm") + answer(truth),
                ]
            else:
                completions = [think("no answer given")] * 3
            fh.write(json.dumps({"task_id": "bbb_class", "example_index": i,
                                 "completions": completions}) + "\n")
        for i, truth in enumerate(REG_TRUTHS):
            if i < 10:
                values = [truth, truth, truth]
            elif i < 20:
                values = [truth + 0.5, truth - 0.1, truth + 0.1]
            elif i < 24:
                values = [truth + 1.0, truth + 2.0, None]
            else:
                values = [None, None, truth + 2.0]
            completions = [
                think("estimating") + (answer(f"{v:.2f}") if v is not None
                                       else answer("N/A"))
                for v in values
            ]
            fh.write(json.dumps({"task_id": "logp_reg", "example_index": i,
                                 "completions": completions}) + "\n")

    with open(DEMO / "suite.yaml", "w") as fh:
        fh.write(
            "name: demo\n"
            "registry: manifest.yaml\n"
            "repetitions: 3\n"
            "seed: 7\n"
            "augmentation:\n"
            "  p_format_convert: 0.5\n"
            "  p_random_traversal: 0.5\n"
            "mock_responses: responses.jsonl\n"
            "tasks:\n"
            "  - category: mol_2d\n"
            "    task_id: bbb_class\n"
            "    metrics: [accuracy, validity_fraction]\n"
            "  - category: mol_2d\n"
            "    task_id: logp_reg\n"
            "    metrics: [mae, rmse, validity_fraction]\n"
        )

    print(f"demo suite written under {DEMO}")


if __name__ == "__main__":
    main()
