# Server-side rebalancing: the sentinel's snapshot becomes a first-fit redirect plan.

from elasticpool.balancer import apply_plan_to_counts, rebalance_plan, snapshot_from_counts

cases = [
    {1: 16, 2: 10, 3: 4},          # one overloaded member, one nearly idle
    {1: 30, 2: 0, 3: 0, 4: 2},      # a backlog too large for any single target
    {1: 5, 2: 6, 3: 5},             # already within delta of the mean
    {1: 12, 2: 12, 3: 0, 4: 0},
]

for counts in cases:
    plan = rebalance_plan(snapshot_from_counts(counts), delta=0.25)
    after = apply_plan_to_counts(counts, plan)
    print("before", list(counts.values()), "plan", plan.moves, "after", list(after.values()))

# delta controls how far above the mean a member must be before it sheds work
counts = {1: 12, 2: 9, 3: 6}
for delta in (0.0, 0.25, 0.5):
    plan = rebalance_plan(snapshot_from_counts(counts), delta)
    print("delta", delta, "->", plan.moves)
