"""Tumor staging task pack built on synthetic thyroid records.

The staging function here is task-shaped, not clinical guidance: it
covers the size thresholds, extension levels, nodal spread and distant
disease distinctions the pack needs, and nothing else. Gold labels come
from this function, and the bundled rule program encodes the same
thresholds, so a perfect extractor scores exact match by construction.
"""

from __future__ import annotations

import numpy as np

from scidc.backends import MockScript, PreferText

from .packs import Instance, TaskPack, arm_suffix_texts, vocab_for_texts
from .scoring import ExactMatch
from .specs import StagingValidity

T_CATEGORIES = ("T1a", "T1b", "T2", "T3a", "T3b", "T4a", "T4b")
N_CATEGORIES = ("N0", "N1a", "N1b")
M_CATEGORIES = ("M0", "M1")

EXTENSIONS = ("confined to the gland", "strap muscle invasion",
              "gross spread beyond strap muscles", "prevertebral fixation")
NODES = ("no nodal involvement", "central compartment only",
         "lateral zone involvement")
METS = ("absent", "present")


def reference_stage(size_cm: float, extension: str, nodes: str,
                    mets: str) -> tuple[str, str, str]:
    """Stage one record; extension levels override the size tiers."""
    if extension == "strap muscle invasion":
        t = "T3b"
    elif extension == "gross spread beyond strap muscles":
        t = "T4a"
    elif extension == "prevertebral fixation":
        t = "T4b"
    elif size_cm < 1.0:
        t = "T1a"
    elif size_cm < 2.0:
        t = "T1b"
    elif size_cm < 4.0:
        t = "T2"
    else:
        t = "T3a"
    if nodes == "lateral zone involvement":
        n = "N1b"
    elif nodes == "central compartment only":
        n = "N1a"
    else:
        n = "N0"
    m = "M1" if mets == "present" else "M0"
    return t, n, m


TNM_PROGRAM = r'''scidc-ir v1
program tnm_staging
meta domain = "tumor staging"

step f0: emit
  text = "Findings:\nsize_cm: "

step size: gen
  regex = "\\d+\\.?\\d*"
  max_tokens = 8

step f1: emit
  text = "\nextension: "

step extension: select
  options = ["confined to the gland", "strap muscle invasion", "gross spread beyond strap muscles", "prevertebral fixation"]

step f2: emit
  text = "\nnodes: "

step nodes: select
  options = ["no nodal involvement", "central compartment only", "lateral zone involvement"]

step f3: emit
  text = "\nmetastasis: "

step mets: select
  options = ["absent", "present"]

step f4: emit
  text = "\nStage: "

step t_cat: select
  dynamic {
    when extension == "strap muscle invasion" -> ["T3b"]
    when extension == "gross spread beyond strap muscles" -> ["T4a"]
    when extension == "prevertebral fixation" -> ["T4b"]
    when size < 1 -> ["T1a"]
    when size < 2 -> ["T1b"]
    when size < 4 -> ["T2"]
    else -> ["T3a"]
  }

step g1: emit
  text = " "

step n_cat: select
  options = ["N0", "N1a", "N1b"]

step check_nodes: validate
  pred = nodes != "lateral zone involvement" or n_cat == "N1b"
  max_retries = 3
  anchor = n_cat
  retry_message = "\n[Retry {retry}] Lateral zone involvement requires N1b; restate the nodal category.\n"
  fallback {
    n_cat = "N1b"
  }

step g2: emit
  text = " "

step m_cat: select
  dynamic {
    when mets == "present" -> ["M1"]
    else -> ["M0"]
  }

step fin: emit
  text = "\n"
'''

_EXT_PHRASES = {
    "confined to the gland": (
        "entirely confined to the thyroid gland",
        "with no spread beyond the gland capsule"),
    "strap muscle invasion": (
        "grossly invading the strap muscles",
        "with extension into the strap muscles"),
    "gross spread beyond strap muscles": (
        "spreading beyond the strap muscles into soft tissue",
        "with gross invasion past the strap muscles"),
    "prevertebral fixation": (
        "fixed to the prevertebral fascia",
        "with fixation to the prevertebral fascia"),
}
_NODE_PHRASES = {
    "no nodal involvement": (
        "no suspicious cervical nodes",
        "nodal survey unremarkable"),
    "central compartment only": (
        "enlarged nodes limited to the central compartment",
        "central compartment adenopathy only"),
    "lateral zone involvement": (
        "biopsy-proven lateral cervical nodes",
        "lateral compartment nodes involved"),
}
_MET_PHRASES = {
    "absent": ("no distant lesions on imaging", "distant workup negative"),
    "present": ("distant lung deposits on imaging",
                "distant spread to bone confirmed"),
}


def make_record(index: int, age: int, size_cm: float, extension: str,
                nodes: str, mets: str) -> str:
    ext_phrase = _EXT_PHRASES[extension][index % 2]
    node_phrase = _NODE_PHRASES[nodes][(index // 2) % 2]
    met_phrase = _MET_PHRASES[mets][(index // 4) % 2]
    return (f"Record {index}: patient aged {age}. Imaging shows a "
            f"{size_cm:.1f} cm thyroid nodule, {ext_phrase}. "
            f"Nodes: {node_phrase}. Distant disease: {met_phrase}.\n"
            "Stage this case.\n")


def _chat_alternative(t: str) -> str:
    # a legal T category the scripted responder muses about, never the gold
    return "T2" if t != "T2" else "T1b"


def generate_instances(seed: int, count: int) -> tuple[Instance, ...]:
    rng = np.random.default_rng(seed)
    instances = []
    for i in range(count):
        age = int(rng.integers(21, 88))
        size_cm = float(rng.integers(3, 80)) / 10.0
        extension = str(rng.choice(EXTENSIONS, p=(0.55, 0.2, 0.15, 0.1)))
        nodes = str(rng.choice(NODES, p=(0.5, 0.25, 0.25)))
        mets = str(rng.choice(METS, p=(0.85, 0.15)))
        t, n, m = reference_stage(size_cm, extension, nodes, mets)
        chat_alt = _chat_alternative(t) if i % 3 == 0 else ""
        instances.append(Instance(
            input=make_record(i, age, size_cm, extension, nodes, mets),
            gold=f"{t} {n} {m}",
            meta=(("size", f"{size_cm:.1f}"), ("extension", extension),
                  ("nodes", nodes), ("mets", mets), ("chat_alt", chat_alt)),
        ))
    return tuple(instances)


def tnm_oracle_script(instance: Instance) -> MockScript:
    """Scripted responder that knows the record's true findings.

    A subset of instances carries a chatty variant whose staging answer
    trails off into commentary naming a second category; constrained
    arms trim it, free-running arms leak it.
    """
    meta = dict(instance.meta)
    t, n, m = reference_stage(float(meta["size"]), meta["extension"],
                              meta["nodes"], meta["mets"])
    t_text = t
    if meta["chat_alt"]:
        t_text = f"{t}, though {meta['chat_alt']} was considered"
    return MockScript((
        PreferText(meta["size"]), PreferText(meta["extension"]),
        PreferText(meta["nodes"]), PreferText(meta["mets"]),
        PreferText(t_text), PreferText(n), PreferText(m),
    ))


def build_tnm_pack(seed: int = 0, count: int = 200) -> TaskPack:
    instances = generate_instances(seed, count)
    script_texts = []
    for instance in instances:
        for directive in tnm_oracle_script(instance).directives:
            script_texts.append(directive.text)
    categories = T_CATEGORIES + N_CATEGORIES + M_CATEGORIES
    vocab = vocab_for_texts(
        [TNM_PROGRAM, *arm_suffix_texts(TNM_PROGRAM), *script_texts,
         *(inst.input for inst in instances)],
        extra_tokens=categories)
    return TaskPack(
        id="tnm",
        program=TNM_PROGRAM,
        vocab=vocab,
        validity=StagingValidity(T_CATEGORIES, N_CATEGORIES, M_CATEGORIES),
        scorer=ExactMatch(canon="staging"),
        instances=instances,
    )
