"""Regenerates the fixture inputs under fixtures/. Transcripts are recorded
separately with `dfactscore evaluate --scripted ... --record ...`."""

import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent


def page_id(i):
    return f"{i:08}"


def write_jsonl(path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")


def write_json(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n")


# Two people named Dick Hanley; the paragraph blends them.
SWIMMER = (
    "Dick Hanley (born January 1, 1936 in Sydney) is an Australian former freestyle swimmer. "
    "Dick Hanley competed at the 1956 Summer Olympics in Melbourne, where he won a silver medal "
    "in the 4x200 metre freestyle relay. He later worked as a swimming coach in New South Wales."
)
COACH = (
    "Richard Hanley (1894 - December 16, 1970) was an American football player and coach. "
    "Dick Hanley served as the head football coach at Northwestern University from 1927 to 1934 "
    "and coached college football at Haskell Institute before that. He died in 1970 in Illinois."
)
DISTRACTORS = [
    ("Hanley Castle", "Hanley Castle is a village in Worcestershire, England, on the River Severn."),
    ("Dick Smith (entrepreneur)", "Dick Smith is an Australian entrepreneur, aviator and activist."),
    ("Northwestern Wildcats football", "The Northwestern Wildcats football program represents Northwestern University."),
]

BLENDED_SENTENCES = [
    ("Dick Hanley was born on January 1, 1936, in Sydney, Australia.",
     [("Dick Hanley was born on January 1, 1936.", "S"), ("Dick Hanley was born in Sydney, Australia.", "S")]),
    ("He was an Australian freestyle swimmer who competed at the 1956 Summer Olympics.",
     [("Dick Hanley was a freestyle swimmer.", "S"), ("Dick Hanley was Australian.", "S"),
      ("Dick Hanley competed at the 1956 Summer Olympics.", "S")]),
    ("He won a silver medal in the 4x200 metre freestyle relay.",
     [("Dick Hanley won a silver medal.", "S"), ("Dick Hanley won the medal in the 4x200 metre freestyle relay.", "S")]),
    ("Hanley later coached college football at Northwestern University.",
     [("Dick Hanley coached college football.", "F"), ("Dick Hanley coached at Northwestern University.", "F")]),
    ("He died on December 16, 1970.", [("Dick Hanley died on December 16, 1970.", "F")]),
]


def blended_bio():
    out = ROOT / "blended_bio"
    pages = [("Dick Hanley (swimmer)", SWIMMER), ("Dick Hanley (American football)", COACH)] + DISTRACTORS
    write_jsonl(out / "dump.jsonl", [{"title": t, "text": x} for t, x in pages])
    text = " ".join(s for s, _ in BLENDED_SENTENCES)
    write_jsonl(out / "paragraphs.jsonl", [{"paragraph_id": "blended_bio", "name": "Dick Hanley", "text": text, "model_tag": "llama-2-13b-chat"}])
    support, facts = [], []
    for _, fs in BLENDED_SENTENCES:
        for fact, who in fs:
            facts.append(fact)
            for i in range(len(pages)):
                supported = (who == "S" and i == 0) or (who == "F" and i == 1)
                support.append({"fact": fact, "page_id": page_id(i), "supported": supported})
    write_json(out / "script.json", {
        "support": support,
        "decompose": [{"sentence": s, "facts": [f for f, _ in fs]} for s, fs in BLENDED_SENTENCES],
        "groups": [{"paragraph_id": "blended_bio", "grouping": [facts]}],
    })


def shapes():
    out = ROOT / "shapes"
    pages = [
        ("Ada Quill", "Ada Quill (born 1950) is a Welsh poet. Ada Quill won the Eisteddfod crown in 1979 and taught at Bangor University."),
        ("Sam Ortega (boxer)", "Sam Ortega (born 1961) is a Mexican boxer. Sam Ortega held a featherweight title in 1988."),
        ("Sam Ortega (architect)", "Sam Ortega (born 1975) is a Chilean architect. Sam Ortega designed the Valparaiso ferry terminal."),
    ] + [(t, x) for t, x in [("Dick Hanley (swimmer)", SWIMMER), ("Dick Hanley (American football)", COACH)]]
    write_jsonl(out / "dump.jsonl", [{"title": t, "text": x} for t, x in pages])
    paragraphs = [
        {"paragraph_id": "one_bio_one_entity", "name": "Ada Quill",
         "text": "Ada Quill is a Welsh poet born in 1950. She won the Eisteddfod crown in 1979. She taught at Bangor University."},
        {"paragraph_id": "many_bios_many_entities", "name": "Sam Ortega",
         "text": "Sam Ortega is a Mexican boxer born in 1961. He held a featherweight title in 1988. "
                 "Another Sam Ortega is a Chilean architect born in 1975. He designed the Valparaiso ferry terminal. He won the Pritzker Prize."},
        {"paragraph_id": "one_bio_many_entities", "name": "Dick Hanley",
         "text": " ".join(s for s, _ in BLENDED_SENTENCES)},
    ]
    write_jsonl(out / "paragraphs.jsonl", paragraphs)
    s = paragraphs[1]["text"].split(". ")
    sentences = [x if x.endswith(".") else x + "." for x in s]
    support = []
    for sent in paragraphs[0]["text"].split(". "):
        sent = sent if sent.endswith(".") else sent + "."
        support.append({"fact": sent, "page_id": page_id(0), "supported": True})
    for i, sent in enumerate(sentences):
        target = 1 if i < 2 else 2
        ok = i != 4  # the Pritzker claim is false for both
        support.append({"fact": sent, "page_id": page_id(target), "supported": ok})
    blend_facts = []
    for _, fs in BLENDED_SENTENCES:
        for fact, who in fs:
            blend_facts.append(fact)
            support.append({"fact": fact, "page_id": page_id(3 if who == "S" else 4), "supported": True})
    write_json(out / "script.json", {
        "support": support,
        "decompose": [{"sentence": x, "facts": [f for f, _ in fs]} for x, fs in BLENDED_SENTENCES],
        "groups": [
            {"paragraph_id": "many_bios_many_entities", "grouping": [sentences[:2], sentences[2:]]},
            {"paragraph_id": "one_bio_many_entities", "grouping": [blend_facts]},
        ],
    })


FIRST = ["Alex", "Jordan", "Morgan", "Casey", "Riley", "Taylor", "Jamie", "Robin", "Drew", "Quinn", "Avery", "Reese"]
LAST = ["Carver", "Lindqvist", "Okafor", "Brennan", "Moreau", "Tanaka", "Castillo", "Hughes", "Novak", "Ferreira", "Dalton", "Mbeki"]
ROLES = [
    ("footballer", "played as a midfielder for {club}", "scored {n} league goals"),
    ("painter", "exhibited at the {club} gallery", "painted {n} portraits"),
    ("politician", "represented {club} in parliament", "served {n} years in office"),
    ("chemist", "worked at the {club} laboratory", "published {n} papers"),
    ("novelist", "lived in {club} for a decade", "wrote {n} novels"),
]
PLACES = ["Leeds", "Porto", "Lagos", "Osaka", "Graz", "Quebec", "Tartu", "Cork", "Perth", "Bergen"]


def corpus30():
    rng = random.Random(20240611)
    out = ROOT / "corpus30"
    pages, disambig, people = [], [], {}
    for k in range(12):
        name = f"{FIRST[k]} {LAST[k]}"
        members = []
        n_people = 2 if k % 3 else 3
        roles = rng.sample(range(len(ROLES)), n_people)
        for r in roles:
            role, a, b = ROLES[r]
            year = rng.randint(1900, 1995)
            place = rng.choice(PLACES)
            n = rng.randint(2, 40)
            title = f"{name} ({role})"
            text = (f"{name} (born {year}) is a {role} from {place}. {name} " + a.format(club=place) + ". "
                    f"{name} " + b.format(n=n) + ". " + " ".join(
                        f"Filler sentence {j} about the career of this {role} in {place}." for j in range(rng.randint(5, 30))))
            pid = page_id(len(pages))
            pages.append({"title": title, "text": text})
            members.append(title)
            people.setdefault(name, []).append({
                "page_id": pid, "facts": [f"{name} was born in {year}.", f"{name} is a {role}.", f"{name} is from {place}.",
                                          f"{name} {a.format(club=place)}.", f"{name} {b.format(n=n)}."]})
        disambig.append({"name": name, "members": members + [f"{name} (missing page)"]})
    for t in ["Leeds", "Porto", "Osaka"]:
        pages.append({"title": t, "text": f"{t} is a city. It has a long history and a busy port or market."})
    write_jsonl(out / "dump.jsonl", pages)
    write_jsonl(out / "disambig.jsonl", disambig)

    names = sorted(people)
    paragraphs, support, relevance, groups = [], [], [], []
    for p in range(30):
        name = names[p % len(names)]
        persons = people[name]
        mix = p % 4
        chosen = [persons[0]] if mix == 0 else persons[:2]
        sentences, group_lists = [], []
        for who in chosen:
            fs = rng.sample(who["facts"], rng.randint(2, 4))
            group_lists.append(fs)
            sentences.extend(fs)
        if p % 5 == 2:
            irrelevant = f"{name} enjoys the weather in spring."
            sentences.append(irrelevant)
            group_lists[-1].append(irrelevant)
            relevance.append({"fact": irrelevant, "relevant": False})
        pid = f"p{p:02}"
        row = {"paragraph_id": pid, "name": name, "text": " ".join(sentences), "model_tag": ["model-a", "model-b"][p % 2]}
        if p % 3 == 0:
            cited = []
            for i, s in enumerate(sentences):
                cited.append(s[:-1] + f" [{(i % 3) + 1}].")
            row["text"] = " ".join(cited)
            row["citations_resolved"] = [{"doc_index": i + 1, "title": persons[0]["page_id"], "text": "cited passage"} for i in range(2)]
        paragraphs.append(row)
        for g, who in zip(group_lists, chosen):
            for fact in g:
                for other in persons:
                    truth = fact in other["facts"] and rng.random() < 0.9
                    support.append({"fact": fact, "page_id": other["page_id"], "supported": truth})
        if mix == 0:
            continue
        if p % 7 == 3:
            groups.append({"paragraph_id": pid, "grouping": "- reworded fact\n- ===\n- another\n"})
        elif mix == 1:
            groups.append({"paragraph_id": pid, "grouping": [sum(group_lists, [])]})
        else:
            groups.append({"paragraph_id": pid, "grouping": group_lists})
    citations = [{"sentence": p["text"].split(" [")[0] + ".", "supported": True} for p in paragraphs if "citations_resolved" in p]
    seen = {}
    for s in support:
        seen[(s["fact"], s["page_id"])] = s
    write_jsonl(out / "paragraphs.jsonl", paragraphs)
    write_json(out / "script.json", {
        "support": sorted(seen.values(), key=lambda s: (s["fact"], s["page_id"])),
        "relevance": relevance,
        "groups": groups,
        "citations": citations,
    })


if __name__ == "__main__":
    blended_bio()
    shapes()
    corpus30()
