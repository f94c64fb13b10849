#!/usr/bin/env python3
"""Generate the bundled fixture manuals and the 20-question sanity set.

The corpus is synthetic but shaped like real operating-manual extracts: ~35
procedure units across four manuals, average body length around 190 words,
one long system-description unit of exactly 3072 words, abbreviation and unit
notation sprinkled through the raw sources so normalization has work to do.

Sanity questions are derived, not invented: the script scans each normalized
document for a contiguous run of distinct content tokens whose echo-question
("What is the <run>?") makes the lexical reader return exactly that run, then
keeps the 20 that pass BOTH the closed-document and the full retrieval
pipeline with exact match.  Only validated fixtures are written.

Usage: python scripts/make_fixture_corpus.py [--out fixtures]
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from pathlib import Path
from xml.sax.saxutils import escape

from opsqa.analysis import CONTENT_STOPWORDS, analyze, token_spans
from opsqa.corpus import AbbrevTable, load_unit_rules, normalize_doc, parse_source
from opsqa.gateway import Pipeline
from opsqa.index import build_index
from opsqa.metrics import QaExample, em_f1, evaluate_qa
from opsqa.reader import LexicalReader

BUNDLED_DATA = Path(__file__).resolve().parent.parent / "src" / "opsqa" / "data"

PHASES = ["taxi", "takeoff", "climb", "cruise", "descent", "approach", "landing", "go-around"]
CREW = ["the flight crew", "the pilot flying", "the pilot monitoring", "the crew"]

# Sentence templates per topic kind.  Slots: subject, value, phase, extra.
SENTENCES = {
    "limit": [
        "The {subject} limit is {value} and applies during {phase}.",
        "Do not exceed {value} for the {subject} in {phase}.",
        "{subject} above {value} requires a maintenance inspection before the next FLT.",
        "Operations beyond {value} are prohibited unless the {subject} placard states otherwise.",
        "With ice accretion the {subject} limit is reduced by {extra}.",
        "The demonstrated {subject} value of {value} is not limiting for {phase}.",
        "When RWY conditions are degraded, reduce the {subject} margin by {extra}.",
        "The {subject} indication must be checked against {value} before {phase}.",
    ],
    "procedure": [
        "{crew} must verify the {subject} before {phase}.",
        "If the {subject} warning persists, apply the QRH steps without delay.",
        "Set the {subject} as required and announce the change.",
        "Confirm the {subject} agrees with the planned figures for {phase}.",
        "The {subject} check is completed when both indications are stable.",
        "During {phase}, monitor the {subject} and call out any deviation.",
        "After {phase}, the {subject} selector returns to the normal position.",
        "Should the {subject} disagree, cross check the standby instrument.",
    ],
    "system": [
        "The {subject} supplies the {extra} under normal ENG operation.",
        "A dedicated channel monitors the {subject} and records faults for maintenance.",
        "The {subject} is powered from the essential bus when the primary source is lost.",
        "Redundancy for the {subject} is provided by two independent {extra} paths.",
        "In case of {subject} failure, the system reverts to the alternate mode automatically.",
        "The {subject} operates continuously from engine start until shutdown.",
        "Ground tests of the {subject} are described in the maintenance documentation.",
        "The {subject} interfaces with the warning computer through the {extra}.",
    ],
}

# Topic table: (doc slug, ata, title, applicability, kind, subject pool,
# value pool, extra pool, optional table rows).  Source text deliberately
# uses raw abbreviations and unit notation from the bundled tables.
TOPICS = [
    ("wind-ldg", "27-10", "LDG wind limitations", "all variants", "limit",
     ["demonstrated XWIND for LDG", "TWIND component", "gust increment"],
     ["38KT", "15KT", "20KT"], ["5KT"],
     [("Configuration", "Limit"), ("CONF FULL", "38KT including gusts"), ("CONF 3", "33KT")]),
    ("wind-tkof", "27-11", "TKOF wind limitations", "all variants", "limit",
     ["XWIND for TKOF", "TWIND for TKOF", "reported gust value"],
     ["35KT", "15KT", "29KT"], ["5KT"], None),
    ("speed-flaps", "27-50", "Flaps and slats speed limits", "all variants", "limit",
     ["flaps extended speed", "slats extended speed", "CONF 1 placard speed"],
     ["230KT", "215KT", "177KT"], ["10KT"],
     [("Position", "Placard speed"), ("CONF 1", "230KT"), ("CONF 2", "215KT"), ("CONF FULL", "177KT")]),
    ("speed-gear", "32-30", "LDG gear speed limits", "all variants", "limit",
     ["gear extension speed", "gear retraction speed", "gear extended speed"],
     ["250KT", "220KT", "280KT"], ["10KT"], None),
    ("alt-ceiling", "34-10", "ALT and ceiling limitations", "all variants", "limit",
     ["maximum operating ALT", "airport elevation bound", "cabin pressure ALT"],
     ["39100FT", "9200FT", "8000FT"], ["800FT"], None),
    ("temp-oat", "21-60", "OAT limitations", "all variants", "limit",
     ["OAT for TKOF", "OAT for engine start", "fuel TEMP floor"],
     ["55°C", "-40°C", "-43°C"], ["5°C"], None),
    ("weight-limits", "08-10", "Structural weight limits", "all variants", "limit",
     ["MTOW figure", "MLW figure", "zero fuel weight"],
     ["79000 kilograms", "67400 kilograms", "64300 kilograms"], ["500 kilograms"],
     [("Weight", "Value"), ("MTOW", "79000 kilograms"), ("MLW", "67400 kilograms")]),
    ("fuel-qty", "28-40", "Fuel QTY limits", "all variants", "limit",
     ["usable fuel QTY", "wing tank imbalance", "center tank sequence"],
     ["23859 liters", "1500 kilograms", "2250 liters"], ["250 liters"], None),
    ("cab-press", "21-30", "Cabin PRESS limits", "all variants", "limit",
     ["differential PRESS", "negative differential", "safety relief setting"],
     ["593 hectopascal", "73 hectopascal", "610 hectopascal"], ["15 hectopascal"], None),
    ("brake-temp", "32-40", "Brake TEMP limits", "all variants", "limit",
     ["brake TEMP for TKOF", "fuse plug protection threshold", "parking brake release value"],
     ["300°C", "800°C", "500°C"], ["50°C"], None),
    ("eng-start", "70-10", "ENG start envelope", "all variants", "limit",
     ["starter duty cycle", "crosswind ENG start bound", "oil TEMP floor"],
     ["4 minutes", "35KT", "-40°C"], ["30 seconds"], None),
    ("appr-speed", "22-30", "APPR speed additives", "all variants", "limit",
     ["wind additive for APPR", "minimum VAPP increment", "gust correction"],
     ["15KT", "5KT", "10KT"], ["5KT"], None),
]

PROCEDURE_TOPICS = [
    ("norm-preflight", "00-20", "Preflight exterior inspection", ["walkaround circuit", "static port covers", "gear pin stowage"], ["chocks and cones"]),
    ("norm-cockpit", "00-25", "Cockpit preparation", ["battery voltage", "IRS alignment", "fuel QTY crosscheck"], ["oxygen PRESS"]),
    ("norm-before-start", "00-30", "Before start flow", ["beacon selection", "door indication", "thrust lever position"], ["parking brake"]),
    ("norm-taxi", "00-35", "Taxi procedures", ["flight control check", "brake response", "takeoff CONF verification"], ["taxi light"]),
    ("norm-tkof", "00-40", "TKOF procedures", ["FLX setting", "rotation callout", "positive climb gear retraction"], ["packs configuration"]),
    ("norm-climb", "00-45", "Climb and acceleration", ["thrust reduction ALT", "acceleration segment", "anti ice selection"], ["climb speed"]),
    ("norm-cruise", "00-50", "Cruise monitoring", ["fuel prediction", "step climb evaluation", "ETOPS tracking"], ["cabin rest rotation"]),
    ("norm-descent", "00-55", "Descent preparation", ["landing elevation", "APPR briefing", "minima selection"], ["seat belts"]),
    ("norm-appr", "00-60", "APPR procedures", ["stabilization gate", "glide capture", "missed APPR setup"], ["autobrake selection"]),
    ("norm-ldg", "00-65", "LDG and rollout", ["flare technique", "reverser deployment", "derotation rate"], ["runway exit speed"]),
    ("norm-ga", "00-70", "GA procedure", ["GA thrust application", "pitch target", "flap retraction schedule"], ["navigation sequencing"]),
    ("norm-shutdown", "00-75", "Parking and shutdown", ["fuel shutoff sequence", "ground power transfer", "beacon off condition"], ["wheel chocks"]),
    ("abn-engfail", "70-90", "ENG failure after V1", ["failure identification", "rudder compensation", "single engine climb"], ["ECAM sequence"]),
    ("abn-fire", "26-10", "ENG fire on ground", ["fire handle activation", "agent discharge", "evacuation decision"], ["tower notification"]),
    ("abn-depress", "21-90", "Rapid depressurization", ["oxygen mask donning", "emergency descent initiation", "level off ALT"], ["crew communication"]),
    ("abn-hydraulic", "29-90", "Hydraulic system loss", ["system isolation", "alternate gear extension", "flap limit selection"], ["landing distance factor"]),
    ("abn-elec", "24-90", "Electrical emergency CONF", ["generator reset", "ram air turbine deployment", "essential bus load"], ["battery endurance"]),
    ("abn-rejected", "00-80", "Rejected TKOF", ["stop decision", "maximum braking", "reverser use"], ["brake cooling time"]),
    ("abn-overweight", "08-90", "Overweight LDG", ["touchdown rate target", "inspection requirement", "fuel jettison alternative"], ["APPR climb limit"]),
    ("abn-windshear", "22-90", "Windshear escape", ["escape maneuver", "thrust setting", "configuration freeze"], ["predictive warning"]),
]

SYSTEM_TOPICS = [
    ("sys-hydraulic", "29-10", "Hydraulic power overview", ["green system pump", "yellow system pump", "blue system electric pump"], ["accumulator", "priority valve"]),
    ("sys-electric", "24-10", "Electrical generation", ["engine driven generator", "auxiliary generator", "static inverter"], ["bus tie logic", "galley shed"]),
    ("sys-bleed", "36-10", "Pneumatic bleed supply", ["high stage valve", "precooler exchanger", "crossbleed duct"], ["temperature sensor", "overpressure switch"]),
    ("sys-flightctl", "27-90", "Flight control architecture", ["elevator aileron computer", "spoiler elevator computer", "rudder trim actuator"], ["load alleviation", "servo loop"]),
]

BIG_DOC = ("sys-gear-long", "32-10", "LDG gear system description", "all variants")
BIG_DOC_WORDS = 3072


def _sentence(rng: random.Random, kind: str, subjects: list[str], values: list[str],
              extras: list[str]) -> str:
    template = rng.choice(SENTENCES[kind])
    return template.format(
        subject=rng.choice(subjects),
        value=rng.choice(values),
        extra=rng.choice(extras),
        phase=rng.choice(PHASES),
        crew=rng.choice(CREW).capitalize(),
    )


def _paragraph(rng: random.Random, kind: str, subjects, values, extras, n: int) -> str:
    return " ".join(_sentence(rng, kind, subjects, values, extras) for _ in range(n))


def _table_xml(rows: list[tuple[str, str]]) -> str:
    header, *body = rows
    lines = ["      <table>"]
    lines.append(
        "        <row header=\"true\">" + "".join(f"<cell>{escape(c)}</cell>" for c in header) + "</row>"
    )
    for row in body:
        lines.append("        <row>" + "".join(f"<cell>{escape(c)}</cell>" for c in row) + "</row>")
    lines.append("      </table>")
    return "\n".join(lines)


def _procedure_xml(doc_id: str, ata: str, applicability: str, title: str,
                   sections: list[tuple[str, list[str], str | None]]) -> str:
    parts = [f'  <procedure id="{doc_id}" ata="{ata}" applicability="{escape(applicability)}">']
    parts.append(f"    <title>{escape(title)}</title>")
    for name, paragraphs, table in sections:
        parts.append(f'    <section name="{escape(name)}">')
        for p in paragraphs:
            parts.append(f"      <p>{escape(p)}</p>")
        if table:
            parts.append(table)
        parts.append("    </section>")
    parts.append("  </procedure>")
    return "\n".join(parts)


def build_sources(rng: random.Random) -> dict[str, str]:
    """Compose the four manual files; returns {filename: xml text}."""
    limitation_docs = []
    for slug, ata, title, appl, kind, subjects, values, extras, table in TOPICS:
        sections = [
            ("General", [_paragraph(rng, kind, subjects, values, extras, rng.randint(4, 6))], None),
            ("Limits", [_paragraph(rng, kind, subjects, values, extras, rng.randint(4, 6))],
             _table_xml(table) if table else None),
        ]
        limitation_docs.append(_procedure_xml(slug, ata, appl, title, sections))

    normal_docs, abnormal_docs = [], []
    for slug, ata, title, subjects, extras in PROCEDURE_TOPICS:
        sections = [
            ("Conditions", [_paragraph(rng, "procedure", subjects, ["the reference value"], extras, rng.randint(3, 5))], None),
            ("Actions", [_paragraph(rng, "procedure", subjects, ["the reference value"], extras, rng.randint(4, 6))], None),
            ("Notes", [_paragraph(rng, "procedure", subjects, ["the reference value"], extras, rng.randint(2, 4))], None),
        ]
        xml = _procedure_xml(slug, ata, "all variants", title, sections)
        (abnormal_docs if slug.startswith("abn") else normal_docs).append(xml)

    system_docs = []
    for slug, ata, title, subjects, extras in SYSTEM_TOPICS:
        sections = [
            ("Description", [_paragraph(rng, "system", subjects, ["the nominal figure"], extras, rng.randint(5, 7))], None),
            ("Operation", [_paragraph(rng, "system", subjects, ["the nominal figure"], extras, rng.randint(4, 6))], None),
        ]
        system_docs.append(_procedure_xml(slug, ata, "all variants", title, sections))

    # One deliberately long unit: the corpus length ceiling.
    slug, ata, title, appl = BIG_DOC
    subjects = ["shock absorber", "retraction actuator", "uplock mechanism", "downlock spring",
                "steering valve", "tachometer harness", "proximity sensor", "torque link"]
    extras = ["hydraulic manifold", "control interface", "monitoring lane"]
    sections, words = [], 0
    part = 1
    while words < BIG_DOC_WORDS:
        text = _paragraph(rng, "system", subjects, ["the nominal figure"], extras, 8)
        sections.append((f"Detail {part}", [text], None))
        words += len(text.split())
        part += 1
    # Trim the final section to land exactly on the target word count.
    overshoot = words - BIG_DOC_WORDS
    if overshoot:
        last_words = sections[-1][1][0].split()
        sections[-1] = (sections[-1][0], [" ".join(last_words[:-overshoot])], None)
    system_docs.append(_procedure_xml(slug, ata, appl, title, sections))

    def manual(docs: list[str]) -> str:
        return "<manual>\n" + "\n".join(docs) + "\n</manual>\n"

    return {
        "limitations.xml": manual(limitation_docs),
        "normal_procedures.xml": manual(normal_docs),
        "abnormal_procedures.xml": manual(abnormal_docs),
        "systems.xml": manual(system_docs),
    }


def candidate_phrases(norm_body: str) -> list[tuple[str, int]]:
    """Contiguous 2-4 token runs of distinct content tokens, cleanly bounded."""
    spans = token_spans(norm_body)
    lowered = [t.lower() for t, _, _ in spans]
    out = []
    for i in range(len(spans)):
        for length in (3, 2, 4):
            j = i + length - 1
            if j >= len(spans):
                continue
            run = lowered[i : j + 1]
            if any(t in CONTENT_STOPWORDS or t.isdigit() for t in run):
                continue
            if len(set(run)) != len(run):
                continue
            # Neighbors must not extend the run with equal-scoring tokens.
            if i > 0 and lowered[i - 1] in run:
                continue
            if j + 1 < len(spans) and lowered[j + 1] in run:
                continue
            text = norm_body[spans[i][1] : spans[j][2]]
            if "\n" in text or "—" in text:
                continue
            out.append((text, spans[i][1]))
    return out


def derive_questions(docs, pipeline: Pipeline, rng: random.Random, want: int = 20):
    """Pick one validated echo-question per doc until `want` are collected."""
    examples = []
    doc_order = list(docs)
    rng.shuffle(doc_order)
    for doc in doc_order:
        if len(examples) >= want:
            break
        for text, start in candidate_phrases(doc.norm_body):
            question = f"What is the {text}?"
            answer = pipeline.answer_doc(question, doc)
            if answer.is_no_answer or em_f1(answer.answer_text, [text]) != (1, 1.0):
                continue
            ranked = pipeline.answer(question)
            if not ranked:
                continue
            top_result, top_answer = ranked[0]
            if top_result.doc_id != doc.doc_id:
                continue
            if em_f1(top_answer.answer_text, [text]) != (1, 1.0):
                continue
            examples.append(QaExample(question=question, gold_doc_id=doc.doc_id,
                                      answers=[(text, start)]))
            break
    return examples


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "fixtures"))
    parser.add_argument("--seed", type=int, default=20)
    args = parser.parse_args()

    rng = random.Random(args.seed)
    sources = build_sources(rng)

    abbrevs = AbbrevTable.from_tsv(BUNDLED_DATA / "abbreviations.tsv")
    unit_rules = load_unit_rules(BUNDLED_DATA / "units.tsv")
    docs = []
    for name in sorted(sources):
        parsed, warnings = parse_source(sources[name])
        assert not warnings, f"{name}: {warnings}"
        docs.extend(normalize_doc(d, abbrevs, unit_rules) for d in parsed)

    word_counts = [len(d.body.split()) for d in docs]
    stats = (len(docs), sum(word_counts) / len(docs), max(word_counts))
    print(f"docs: {stats[0]}  avg words: {stats[1]:.1f}  max words: {stats[2]}")

    pipeline = Pipeline(build_index(docs), LexicalReader(), reranker="zscore_add", k=10)
    examples = derive_questions(docs, pipeline, rng)
    if len(examples) < 20:
        print(f"only {len(examples)} validated questions; adjust the topic pools", file=sys.stderr)
        return 1

    report = evaluate_qa(examples, pipeline)
    print(f"closed-document sanity check: {report.summary()}")
    assert report.em == 100.0 and report.f1 == 100.0, "sanity set must be exact"
    open_hits = sum(
        em_f1(pipeline.answer(ex.question)[0][1].answer_text, [t for t, _ in ex.answers])[0]
        for ex in examples
    )
    print(f"open-retrieval sanity check: {open_hits}/{len(examples)} EM hits")
    assert open_hits == len(examples)

    out = Path(args.out)
    (out / "manuals").mkdir(parents=True, exist_ok=True)
    for name, xml in sorted(sources.items()):
        (out / "manuals" / name).write_text(xml, encoding="utf-8")
    with open(out / "questions_sanity.jsonl", "w", encoding="utf-8") as handle:
        for ex in examples:
            record = {
                "question": ex.question,
                "gold_doc_id": ex.gold_doc_id,
                "answers": [{"text": t, "char_start": s} for t, s in ex.answers],
            }
            handle.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
    print(f"wrote {len(sources)} manuals and {len(examples)} questions to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
