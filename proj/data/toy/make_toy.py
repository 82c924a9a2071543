"""Regenerate docs.jsonl: short labelled documents over four themes."""
import json
import random

THEMES = {
    "space": "orbit rocket launch planet moon star galaxy telescope astronaut mission satellite solar gravity comet crater nasa spacecraft mars",
    "cooking": "recipe oven flour butter sugar bake sauce garlic onion pepper salt simmer dough pasta cheese kitchen roast flavor",
    "sports": "team game season coach player score goal match league win championship ball field defense tournament fans referee",
    "computing": "software code program compiler memory processor kernel bug server network database algorithm linux file debug thread cache",
}
FILLER = "the a of and to in is was it on for with as this that they we very some more then there".split()
SHARED = "new time year people good first great day".split()


def main():
    rng = random.Random(20)
    names = sorted(THEMES)
    lines = []
    for i in range(160):
        label = names[i % 4]
        other = names[(i % 4 + 1 + rng.randrange(3)) % 4]
        words = []
        for _ in range(rng.randint(30, 60)):
            u = rng.random()
            if u < 0.35:
                words.append(rng.choice(FILLER))
            elif u < 0.85:
                words.append(rng.choice(THEMES[label].split()))
            elif u < 0.95:
                words.append(rng.choice(THEMES[other].split()))
            else:
                words.append(rng.choice(SHARED))
        split = "train" if i < 112 else "test"
        lines.append(json.dumps({"id": f"toy{i:03d}", "text": " ".join(words), "label": label, "split": split}))
    with open("docs.jsonl", "w") as f:
        f.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
