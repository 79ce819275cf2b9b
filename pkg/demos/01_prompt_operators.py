"""Edit a prompt with the three mutation operators.

A prompt is a list of words ending in the condition placeholder ``<em>``.
The search edits the words around it, one operation at a time, asking a
masked-token proposer for the word to insert or substitute.

    python demos/01_prompt_operators.py
"""

from promptevo import load_world, tokenize_prompt
from promptevo.prompt import apply_addition, apply_removal, apply_replacement, expand_children, masked_text

world = load_world()  # the bundled toy world doubles as a proposer
prompt = tokenize_prompt("Text that expresses <em>")
print("prompt:      ", prompt.template)
print("for joy:     ", prompt.render("joy"))
print()

# Each operator works on one position; the proposer sees the masked prompt.
print("masked for an insert at 1:", masked_text(prompt, 1, insert=True))
print("addition at 1:   ", apply_addition(prompt, 1, world).template)
print("replacement at 1:", apply_replacement(prompt, 1, world).template)
print("removal at 1:    ", apply_removal(prompt, 1).template)
print()

# The full neighbourhood: every gap, every word, deduplicated.
children = expand_children(prompt, world)
print(f"{len(children)} children (bound 3T+1 = {3 * prompt.n_mutable + 1}):")
for child in children:
    d = child.lineage.descriptor
    print(f"  {d.op.short:<6}@{d.position}  {child.template}")
