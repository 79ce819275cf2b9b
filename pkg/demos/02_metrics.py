"""The two measurements behind the objective.

Generated texts that merely repeat their prompt are caught with sentence
BLEU against the prompt; the rest are scored with macro-F1 of a classifier
that has to recover the condition each text was generated for.

    python demos/02_metrics.py
"""

from promptevo.metrics import BleuConfig, bleu_sentence, is_paraphrase, macro_f1, per_label_f1, tally

prompt = "Text that expresses joy"
for text in ("The text expresses joy.", "Text that expresses joy", "what a wonderful morning"):
    b = bleu_sentence(text, prompt)
    print(f"BLEU {b:.3f}  filtered={is_paraphrase(text, prompt)!s:<5}  {text!r}")

# Smoothing matters for short texts that share only a few n-grams.
eps = BleuConfig(smoothing="epsilon")
print(f"\nwith epsilon smoothing: {bleu_sentence('The text expresses joy.', prompt, eps):.2e}")

labels = ["joy", "fear", "anger"]
gold = ["joy", "joy", "fear", "fear", "anger", "anger"]
pred = ["joy", "fear", "fear", "fear", "anger", "joy"]
t = tally(pred, gold, labels)
print("\nconfusion matrix (rows gold, cols predicted):")
print(t.matrix)
for label, f1 in per_label_f1(t).items():
    print(f"  {label:<6} F1 {f1:.3f}")
print(f"macro-F1 {macro_f1(t):.3f}")
