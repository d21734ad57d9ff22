#pragma once

#include <string>
#include <vector>

#include "chase/backbone.hpp"
#include "chase/ops.hpp"
#include "chase/rng.hpp"
#include "chase/tensor.hpp"
#include "chase/train_loop.hpp"

namespace chase {

// Single-branch comparison model: the same recurrent encoder with a pooled
// classification head. Dropout (when configured) sits on the pooled encoder
// output and on the head's hidden layer.
struct ClassifierConfig {
    int input_dim = 6;
    int hidden = 64;
    int head_hidden = 32;
    double dropout = 0.0;  // > 0 enables stochastic passes for the MC variant
    int epochs = 30;
    int batch_size = 64;
    int patience = 6;
    double lr = 1e-3;
    std::uint64_t seed = 42;
};

struct ClassifierModel {
    ClassifierConfig config;
    ParamSet params;
    GruSpec gru;
};

ClassifierModel make_classifier(const ClassifierConfig& cfg);

struct ScoredPrediction {
    int prediction = 0;       // argmax class
    double accept_score = 0;  // max (mean) softmax probability
    double prob[2] = {0.5, 0.5};
};

// Deterministic forward (dropout off). probs has 2 entries per sequence.
void classifier_probs(const ClassifierModel& model, const std::vector<SeqView>& seqs,
                      std::vector<double>& probs, int batch_size = 64);

// Maximum softmax probability scoring.
std::vector<ScoredPrediction> msp_scores(const ClassifierModel& model,
                                         const std::vector<SeqView>& seqs);

// Stochastic-pass scoring: softmax averaged over `passes` dropout samples.
// Mask streams are keyed by (pass, sequence index), so any evaluation order
// or batching yields identical scores.
std::vector<ScoredPrediction> mc_dropout_scores(const ClassifierModel& model,
                                                const std::vector<SeqView>& seqs,
                                                int passes, std::uint64_t mask_seed);

// Mean softmax over ensemble members.
std::vector<ScoredPrediction> deep_ensemble_scores(const std::vector<ClassifierModel>& members,
                                                   const std::vector<SeqView>& seqs);

struct TrainedClassifier {
    ClassifierModel model;
    FitResult log;
};

TrainedClassifier train_classifier(const std::vector<SeqView>& train,
                                   const std::vector<int>& train_labels,
                                   const std::vector<SeqView>& val,
                                   const std::vector<int>& val_labels,
                                   const ClassifierConfig& cfg);

std::string classifier_to_json(const ClassifierModel& model, const std::vector<double>& norm_mean,
                               const std::vector<double>& norm_std);
ClassifierModel classifier_from_json(const std::string& text, std::vector<double>* norm_mean,
                                     std::vector<double>* norm_std);

}  // namespace chase
