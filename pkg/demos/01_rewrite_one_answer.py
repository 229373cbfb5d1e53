# Walk one seeker answer through the four adversarial rewrites.
from crsadv import bundled_kb, bundled_lexicon
from crsadv.corpus import EvalInstance, Turn
from crsadv.perturb import SCENARIOS, perturb_instance

kb = bundled_kb()
lexicon = bundled_lexicon()

# a seeker answer naming one title; the span lets Cat1 rewrites leave it alone
text = "I like The Last Exorcism"
answer = Turn("seeker", text, ["101"], [], [(7, len(text), "101")])
inst = EvalInstance("exorcism", 1, [answer], answer, ["101"], "movie")

for scenario in SCENARIOS:
    out = perturb_instance(inst, scenario, lexicon, kb, seed=14)
    print(f"{scenario:12s} expect {out.expectation:9s} {out.answer_adv}")

# Cat2-Change has three modes; auto picks an antonym when the lexicon has one
plain = Turn("seeker", "I like watching horror movies")
inst2 = EvalInstance("horror", 1, [plain], plain, ["104"], "movie")
for mode in ("antonym", "negation", "auto"):
    out = perturb_instance(inst2, "cat2_change", lexicon, kb, cat2_mode=mode)
    print(f"cat2_change/{mode:8s} {out.answer_adv}")

# a different seed may pick a different contrast genre and item, same seed never does
a = perturb_instance(inst, "cat1_add", lexicon, kb, seed=3).answer_adv
b = perturb_instance(inst, "cat1_add", lexicon, kb, seed=3).answer_adv
assert a == b
print(a)
