// Embeds three Gaussian blobs and prints the loss trace endpoints and the retrieval AUC.

#include <cstdio>

#include <trimap/trimap.hpp>

int main() {
    const trimap::Dataset data = trimap::three_blobs(300, 50, 1);

    trimap::EmbedConfig config;
    config.iterations = 200;
    const trimap::Embedding result = trimap::embed(data, config);

    const trimap::PRCurve curve = trimap::precision_recall(data.points, result.coords);
    std::printf("triplets: %zu nearest-neighbor + %zu random\n", result.triplet_counts.nn,
                result.triplet_counts.random);
    std::printf("loss: %.4f -> %.4f over %zu iterations\n", result.loss_trace.front(), result.loss_trace.back(),
                result.loss_trace.size() - 1);
    std::printf("mean precision-recall AUC: %.4f\n", curve.auc);
    std::printf("3-means label agreement: %.3f\n", trimap::kmeans_agreement(result.coords, *data.labels));
    return 0;
}
