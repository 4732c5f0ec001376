// Worst-case verification of a hand-built network computing |x| on [-1, 2]
// against the limits [-10, 1.5]. The largest violation is 0.5 at x = 2, and
// with alpha = 0.8 the farthest point still violating by 0.4 is x = 1.9.

#include <wcpfnn/nn/mlp.hpp>
#include <wcpfnn/verify/report.hpp>

#include <cstdio>

using namespace wcpfnn;

int main() {
    nn::MlpParams net;
    nn::Layer hidden{Eigen::MatrixXd(2, 1), Eigen::VectorXd::Zero(2)};
    hidden.weights << 1.0, -1.0;
    nn::Layer out{Eigen::MatrixXd(1, 2), Eigen::VectorXd::Zero(1)};
    out.weights << 1.0, 1.0;
    net.layers = {hidden, out};
    net.input_map = nn::AffineMap::identity(1);
    net.output_map = nn::AffineMap::identity(1);

    const verify::InputBox box{Eigen::VectorXd::Constant(1, -1.0), Eigen::VectorXd::Constant(1, 2.0)};
    const verify::GenerationLimits lim{Eigen::VectorXd::Constant(1, -10.0), Eigen::VectorXd::Constant(1, 1.5)};
    verify::VerificationConfig cfg;
    cfg.hypercube.alpha = 0.8;
    const auto rep = verify::verify_network(net, box, lim, cfg);

    std::printf("v_g_max  %.6f at D_WC = %.6f (certified: %s)\n", rep.worst_case.v_g_max, rep.worst_case.d_wc[0],
                rep.certified() ? "yes" : "no");
    if (rep.hypercube) {
        std::printf("d        %.6f, witness D_0 = %.6f\n", rep.hypercube->d_normalized, rep.hypercube->witness[0]);
    }
    std::printf("%s\n", verify::to_json(rep).dump(2).c_str());
    return rep.certified() ? 0 : 1;
}
