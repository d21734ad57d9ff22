#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "chase/rng.hpp"
#include "chase/tensor.hpp"

namespace chase {

struct FitResult {
    std::vector<double> train_losses;  // per epoch, mean over batches
    std::vector<double> val_losses;
    int best_epoch = -1;   // 0-based epoch index of the restored checkpoint
    int epochs_run = 0;
};

// Shared minibatch driver: seeded shuffling, patience-based early stopping on
// the validation loss, best-checkpoint restore. train_batch must accumulate
// gradients and return the mean batch loss; the driver applies the optimizer
// step. Both callbacks must be deterministic given their inputs.
template <typename Optimizer, typename TrainBatchFn, typename ValLossFn>
FitResult fit_loop(int n_samples, int batch_size, int epochs, int patience,
                   Rng shuffle_rng, ParamSet& params, Optimizer& opt,
                   TrainBatchFn&& train_batch, ValLossFn&& val_loss) {
    FitResult result;
    std::vector<int> order(static_cast<std::size_t>(n_samples));
    for (int i = 0; i < n_samples; ++i) order[static_cast<std::size_t>(i)] = i;

    double best_val = std::numeric_limits<double>::infinity();
    std::vector<Tensor> best_params;
    int stale = 0;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        Rng epoch_rng = shuffle_rng.stream(static_cast<std::uint64_t>(epoch));
        epoch_rng.shuffle(order);

        double epoch_loss = 0.0;
        int batches = 0;
        for (int start = 0; start < n_samples; start += batch_size) {
            int stop = std::min(n_samples, start + batch_size);
            std::vector<int> idx(order.begin() + start, order.begin() + stop);
            double loss = train_batch(idx, epoch, batches);
            if (!std::isfinite(loss))
                throw NumericalError("training aborted: non-finite loss at epoch " +
                                     std::to_string(epoch) + ", batch " +
                                     std::to_string(batches));
            opt.step(params);
            epoch_loss += loss;
            ++batches;
        }
        result.train_losses.push_back(epoch_loss / std::max(1, batches));

        double vl = val_loss();
        if (!std::isfinite(vl))
            throw NumericalError("training aborted: non-finite validation loss");
        result.val_losses.push_back(vl);
        result.epochs_run = epoch + 1;

        if (vl < best_val - 1e-12) {
            best_val = vl;
            result.best_epoch = epoch;
            best_params.clear();
            for (const auto& e : params.entries()) best_params.push_back(e.value);
            stale = 0;
        } else if (++stale >= patience) {
            break;
        }
    }

    if (!best_params.empty()) {
        auto& entries = params.entries();
        for (std::size_t i = 0; i < entries.size(); ++i) entries[i].value = best_params[i];
    }
    return result;
}

}  // namespace chase
