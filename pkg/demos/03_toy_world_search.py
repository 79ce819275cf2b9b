"""Run the full search on the bundled toy world and check it against
exhaustive enumeration.

The toy world is rigged so that certain word combinations in the prompt
make the generator write texts that the classifier gets right. The search
has to discover them one edit at a time.

    python demos/03_toy_world_search.py
"""

from promptevo import OptimizerConfig, evaluate_prompt, load_world, optimize, tokenize_prompt
from promptevo.simworld import brute_force_best

SEED = "Write a text that expresses <em>"
world = load_world()
cfg = OptimizerConfig(labels=world.labels, max_iterations=6)

result = optimize(SEED, world.backends(), cfg)
print(f"{'iter':<5}{'op':<7}{'macro-F1':<10}prompt")
for i, cand in enumerate(result.pool):
    lin = cand.prompt.lineage
    op = lin.descriptor.op.short if lin and i else "---"
    print(f"{i:<5}{op:<7}{cand.value:<10.3f}{cand.prompt.template}")
print(f"\nselected iteration {result.best_iteration}: {result.best.prompt.template!r}")

# The incumbent is always a child, never the parent, so the score can dip
# (iteration 3 here); the pool remembers the better earlier prompts.

for depth in (1, 2):
    oracle = brute_force_best(SEED, depth, world)
    greedy = optimize(SEED, world.backends(), OptimizerConfig(labels=world.labels, max_iterations=depth))
    print(
        f"depth {depth}: oracle {oracle.best_score:.4f} over {oracle.neighborhood_size} prompts, "
        f"search {greedy.best.value:.4f}"
    )

# An echoing prompt produces texts identical to the prompt; the BLEU filter
# disqualifies it.
echo = evaluate_prompt(tokenize_prompt("Write a text that repeat expresses <em>"), world.backends(), cfg)
print(f"\necho prompt disqualified: {echo.score.disqualified} ({echo.warnings[0]})")
