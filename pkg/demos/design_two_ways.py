"""Design a switching plan for a two-function chain with both methods.

Seventeen requests per second pass through two functions. The first has
machines of speed 6, the second of speed 8, so each keeps two machines on and
cycles a third. The question is how long each cycle should be: longer cycles
pay the switching delay less often but build bigger queues and more delay.
"""

from chainplan import optimize_period, plan_chain, reference_chain, solve_linear
from chainplan.period import cost_of_period

chain = reference_chain(deadline=0.02)

# Per-function periods from the linear approximation.
lin = solve_linear(chain)
print("linear approximation")
print(f"  multiplier lambda  {lin.lam:.4f}  (deadline {'binds' if lin.constrained else 'is slack'})")
for i, (T, q) in enumerate(zip(lin.periods, lin.qmax), start=1):
    print(f"  F{i}: period {T * 1e3:7.2f} ms, queue reservation {q:.4f}")
print(f"  cost {lin.cost.total:.4f} (lower bound {lin.cost.lower_bound:.1f})")

# One period for the whole chain, with aligned onsets.
design = optimize_period(chain)
print("\ncommon period")
for T, J in design.candidates:
    print(f"  candidate T = {T * 1e3:7.2f} ms  ->  J = {J:.4f}")
print(f"  chosen T* = {design.period * 1e3:.2f} ms, cost {design.cost.total:.4f}")

# The cost curve explains the choice: it keeps falling up to the deadline cap.
print("\nJ(T) on a coarse grid up to the cap")
for k in range(0, 11):
    T = design.deadline_cap * k / 10
    print(f"  {T * 1e3:7.2f} ms  {cost_of_period(chain, T):8.4f}")

# A looser deadline changes the linear answer: the optimum becomes unconstrained.
loose = solve_linear(chain.with_deadline(0.05))
print(f"\nwith a 50 ms deadline the linear method picks sum(x) = {sum(loose.x) * 1e3:.1f} ms"
      f" ({'constrained' if loose.constrained else 'unconstrained'})")

for method in ("linear", "common-period"):
    plan = plan_chain(chain, method)
    print(f"{method:>14}: total {plan.cost.total:.4f}, e2e bound {plan.e2e_bound * 1e3:.2f} ms")
