"""Numerics behind threshold sampling: truncated softmax policies.

On a small reward landscape, watch the KL divergence between the
truncated policy and the full softmax collapse as the temperature drops,
and the reward variance under the truncated policy concentrate to zero.
"""
from hoprag.boltzmann import (
    RewardLandscape,
    format_report,
    kl_truncated,
    min_threshold_for_delta,
    report_grid,
    truncated_variance,
)

LANDSCAPE = RewardLandscape(atoms=((0.0, 1), (0.5, 1), (1.0, 1)))


def main() -> None:
    alphas = [1, 0.5, 0.2, 0.1, 0.05]
    print("full report at threshold k = 0.4:")
    print(format_report(report_grid(LANDSCAPE, alphas, 0.4)))

    print("\nKL(truncated || full) at k = 0.5, shrinking temperature:")
    for alpha in alphas:
        print(f"  alpha={alpha:<5} KL={kl_truncated(LANDSCAPE, alpha, 0.5):.3e}")

    print("\nreward variance under the truncated policy at k = 0.4:")
    for alpha in [1, 0.3, 0.1, 0.03]:
        print(f"  alpha={alpha:<5} var={truncated_variance(LANDSCAPE, alpha, 0.4):.3e}")

    for delta in [0.5, 1e-2, 1e-6]:
        k = min_threshold_for_delta(LANDSCAPE, 0.1, delta)
        print(f"\nlargest threshold with KL < {delta}: k = {k}")
        print(f"  check: KL = {kl_truncated(LANDSCAPE, 0.1, k):.3e}")


if __name__ == "__main__":
    main()
