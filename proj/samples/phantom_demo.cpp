// Trains on three phantoms and segments a fourth, printing accuracy and Dice.
//
//   phantom_demo [out_dir]
#include <iostream>
#include <vector>

#include "vesselseg/app.hpp"

int main(int argc, char** argv) {
    using namespace vesselseg;
    const fs::path out = argc > 1 ? argv[1] : "phantom_demo_out";

    RunConfig cfg;
    cfg.n_samples = 20000;
    cfg.em.k_per_class = 5;
    cfg.em.restarts = 1;

    std::vector<Phantom> train;
    std::vector<ImageFeatures> feats;
    for (int i = 0; i < 3; ++i) {
        train.push_back(generate_phantom(192, 192, 12, derive_seed(7, static_cast<std::uint64_t>(i))));
        RgbImage rgb;
        rgb.planes = {train.back().image, train.back().image, train.back().image};
        feats.push_back(extract_features(rgb, train.back().fov, cfg));
    }
    std::vector<TrainingImage> views;
    for (int i = 0; i < 3; ++i) views.push_back({feats[i].normalized, train[i].truth, train[i].fov});
    const auto set = sample_training_set(views, cfg.n_samples, cfg.em.seed);
    const auto model = train_bayes_model(set, cfg.em, false, feats[0].stats);

    const auto test = generate_phantom(192, 192, 12, 99);
    RgbImage rgb;
    rgb.planes = {test.image, test.image, test.image};
    const auto seg = segment_image(model, rgb, test.fov, cfg);

    const auto counts = confusion(seg.mask, test.truth, test.fov);
    std::cout << "accuracy " << accuracy(counts).value() << "  dice " << dice(seg.mask, test.truth) << "\n";
    save_png(out / "phantom.png", test.image);
    save_png(out / "truth.png", test.truth);
    save_png(out / "mask.png", seg.mask);
    save_png(out / "posterior.png", seg.posterior);
    std::cout << "images written to " << out.string() << "\n";
}
