#pragma once

#include <string>
#include <vector>

#include "chase/ops.hpp"
#include "chase/rng.hpp"
#include "chase/tensor.hpp"
#include "chase/train_loop.hpp"

namespace chase {

enum class HeadMode : int { dual = 0, connected_only = 1, not_connected_only = 2 };

struct BackboneConfig {
    int input_dim = 6;
    int hidden = 64;
    int aux_hidden = 32;
    double margin = 1.0;         // m
    double lambda_margin = 1.0;  // weight on the hypothesis hinge
    double lambda_aux = 1.5;     // weight on the auxiliary cross-entropy
    int epochs = 30;
    int batch_size = 64;
    int patience = 6;
    double lr = 1e-3;
    std::uint64_t seed = 42;
    HeadMode head_mode = HeadMode::dual;
};

// Per-sequence outputs: class-conditional sequence scores and both softmax
// signals. pi_hyp is exactly softmax(-ell_c, -ell_n).
struct BackboneOutput {
    double ell_c = 0.0;
    double ell_n = 0.0;
    double pi_hyp[2] = {0.5, 0.5};
    double pi_aux[2] = {0.5, 0.5};
    double gap = 0.0;  // ell_n - ell_c
};

// What backbone training is allowed to see: features and the binary label.
// Ambiguity never enters this type.
struct SeqView {
    const double* x = nullptr;  // frames x input_dim, normalized, row-major
    int frames = 0;
};

struct BackboneModel {
    BackboneConfig config;
    ParamSet params;
    GruSpec gru;

    bool has_head(int cls) const;
    std::string head_prefix(int cls) const;
};

BackboneModel make_backbone(const BackboneConfig& cfg);

// Packs sequence rows into a time-major batch buffer (T x B x D).
void pack_time_major(const std::vector<SeqView>& seqs, const std::vector<int>& idx,
                     std::vector<double>& xtm, int frames, int input_dim);

// Batched forward. xtm is time-major over the full T frames; the encoder
// consumes frames 1..T-1 and the heads score predictions of frames 2..T.
void backbone_forward_batch(const BackboneModel& model, const double* xtm, int B,
                            int frames, BackboneOutput* outs);

std::vector<BackboneOutput> backbone_outputs(const BackboneModel& model,
                                             const std::vector<SeqView>& seqs,
                                             int batch_size = 64);

// Margin objective for one sequence:
//   ell^y + lambda_m * max(0, m - (ell^ybar - ell^y)) + lambda_c * CE(pi_aux, y)
double backbone_loss(const BackboneOutput& out, int label, const BackboneConfig& cfg);

// Mean loss over a batch with gradient accumulation into model.params.
double backbone_loss_and_grad(BackboneModel& model, const double* xtm, int B, int frames,
                              const int* labels);

struct TrainedBackbone {
    BackboneModel model;
    FitResult log;
};

TrainedBackbone train_backbone(const std::vector<SeqView>& train, const std::vector<int>& train_labels,
                               const std::vector<SeqView>& val, const std::vector<int>& val_labels,
                               const BackboneConfig& cfg);

// Checkpoint serialization. norm_mean/norm_std travel with the parameters so
// a checkpoint is self-contained for scoring.
std::string backbone_to_json(const BackboneModel& model, const std::vector<double>& norm_mean,
                             const std::vector<double>& norm_std);
BackboneModel backbone_from_json(const std::string& text, std::vector<double>* norm_mean,
                                 std::vector<double>* norm_std);

}  // namespace chase
