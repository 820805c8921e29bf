// Minimal library walk-through: generate a short synthetic basin, train one
// gate at the default lambda and compare it with the uniform ensemble.

#include <iostream>

#include "mpmoe/mpmoe.hpp"

int main() {
    using namespace mpmoe;
    const ForecastPanel panel = generate_synthetic(standard_spec(1500), 11);

    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.seeds = {0};
    const TrainedRun run = train(panel, cfg, 0);
    const BaselineReport base = baseline_eval(panel, split(panel, SplitSpec{cfg.split}));

    std::cout << "gate      mae_1h=" << run.result.report.mae_1h << "  dtw=" << run.result.report.dtw << '\n';
    std::cout << "ensemble  mae_1h=" << base.ensemble_mean.mae_1h << "  dtw=" << base.ensemble_mean.dtw << '\n';
    std::cout << "mean gate weights:";
    for (std::size_t k = 0; k < panel.expert_names.size(); ++k)
        std::cout << ' ' << panel.expert_names[k] << '=' << run.result.report.mean_gate_weights[k];
    std::cout << '\n';
}
