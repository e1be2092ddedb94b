#pragma once

#include "dsse/dataset.hpp"

namespace dsse {

// Single hidden sigmoid layer with a linear read-out:
//   g(z) = out_mean + out_std .* (A sigmoid(W zhat + b)),
//   zhat = (z - in_mean) ./ in_std.
struct NnModel {
    std::size_t L = 0;     // input width
    std::size_t T = 0;     // hidden units
    std::size_t K_out = 0; // output width (packed state, 2K)
    Vec W;                 // T x L, row-major
    Vec b;                 // T
    Vec A;                 // K_out x T, row-major
    Vec in_mean, in_std;
    Vec out_mean, out_std;
    std::uint64_t fingerprint = 0; // feeder/measurement layout identity
};

Vec nn_forward(const NnModel& m, const Vec& z);

// eps-insensitive squared error in the de-normalized output space:
// max(||g - v||^2 - eps^2, 0).
double hinge_sample_loss(const Vec& g, const double* v_target, double eps);

struct TrainConfig {
    std::size_t hidden = 512;
    double epsilon = 0.5;
    int max_epochs = 200;
    std::size_t batch = 128;
    double lr = 1e-3;
    int patience = 10;          // epochs without validation improvement
    double train_fraction = 0.9;
    std::uint64_t seed = 1;
};

struct TrainReport {
    int epochs = 0;
    int best_epoch = 0;
    double best_val = 0.0;
    double final_train = 0.0;
    Vec train_curve;
    Vec val_curve;
    bool early_stopped = false;
    std::size_t n_train = 0;
    std::size_t n_val = 0;
};

// Adam on the hinge loss with a seeded split/shuffle, early stopping on the
// validation loss, and restoration of the best-validation parameters.
NnModel train_network(const Dataset& data, const TrainConfig& cfg,
                      TrainReport* report = nullptr);

// Mean hinge loss of the model over every dataset row.
double dataset_hinge(const NnModel& m, const Dataset& d, double eps);

// Summed hinge loss over the given rows plus the summed parameter
// gradients (gW/gb/gA are resized and zeroed).  This is the inner-loop
// code path train_network runs per batch; it is public so gradient
// checks exercise the shipped implementation rather than a copy.
double hinge_batch_grad(const NnModel& m, const Dataset& d,
                        const std::size_t* rows, std::size_t n, double eps,
                        Vec& gW, Vec& gb, Vec& gA);

void save_model(const std::string& path, const NnModel& m);
NnModel load_model(const std::string& path);

} // namespace dsse
