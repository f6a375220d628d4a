#include "stabcp/models.hpp"

#include <cmath>
#include <stdexcept>

#include "stabcp/errors.hpp"
#include "stabcp/rng.hpp"

namespace stabcp {

double huber_loss(double epsilon, double y, double z) {
    if (epsilon <= 0.0) throw std::invalid_argument("huber_loss: epsilon must be positive");
    const double r = y - z;
    if (std::abs(r) <= epsilon) return 0.5 * r * r;
    return epsilon * std::abs(r) - 0.5 * epsilon * epsilon;
}

double huber_dz(double epsilon, double y, double z) {
    if (epsilon <= 0.0) throw std::invalid_argument("huber_dz: epsilon must be positive");
    const double r = y - z;
    if (std::abs(r) <= epsilon) return -r;
    return r > 0.0 ? -epsilon : epsilon;
}

LipschitzProfile linear_huber_profile(const Eigen::MatrixXd& train_F, const Eigen::MatrixXd& test_F,
                                      double epsilon, double gamma, double lambda_sc) {
    if (epsilon <= 0.0) throw std::invalid_argument("linear_huber_profile: epsilon must be positive");
    if (train_F.rows() == 0) throw std::invalid_argument("linear_huber_profile: no training rows");
    if (test_F.cols() != train_F.cols())
        throw std::invalid_argument("linear_huber_profile: feature dimensions differ");
    LipschitzProfile p;
    p.gamma = gamma;
    p.nu = train_F.rowwise().norm();
    p.rho = epsilon * p.nu;
    p.phi = p.nu.array().square();
    p.rho_bar = p.rho.mean();
    p.test_nu = test_F.rowwise().norm();
    p.test_rho = epsilon * p.test_nu;
    p.test_phi = p.test_nu.array().square();
    p.lambda_sc = lambda_sc;
    return p;
}

double kernel_value(const KernelSpec& spec, const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
    if (a.size() != b.size()) throw std::invalid_argument("kernel_value: dimension mismatch");
    switch (spec.kind) {
        case KernelKind::Linear:
            return a.dot(b);
        case KernelKind::Rbf: {
            if (spec.sigma <= 0.0) throw std::invalid_argument("kernel_value: sigma must be positive");
            const double d2 = (a - b).squaredNorm();
            return std::exp(-d2 / (2.0 * spec.sigma * spec.sigma));
        }
        case KernelKind::Polynomial: {
            if (spec.degree < 1) throw std::invalid_argument("kernel_value: degree must be at least 1");
            return std::pow(a.dot(b) + spec.offset, spec.degree);
        }
    }
    throw std::invalid_argument("kernel_value: unknown kind");
}

Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    if (A.cols() != B.cols()) throw std::invalid_argument("kernel_matrix: dimension mismatch");
    switch (spec.kind) {
        case KernelKind::Linear:
            return A * B.transpose();
        case KernelKind::Rbf: {
            if (spec.sigma <= 0.0) throw std::invalid_argument("kernel_matrix: sigma must be positive");
            const Eigen::VectorXd an = A.rowwise().squaredNorm();
            const Eigen::VectorXd bn = B.rowwise().squaredNorm();
            Eigen::MatrixXd d2 = -2.0 * A * B.transpose();
            d2.colwise() += an;
            d2.rowwise() += bn.transpose();
            return (-d2.array().max(0.0) / (2.0 * spec.sigma * spec.sigma)).exp();
        }
        case KernelKind::Polynomial: {
            if (spec.degree < 1) throw std::invalid_argument("kernel_matrix: degree must be at least 1");
            return ((A * B.transpose()).array() + spec.offset).pow(spec.degree);
        }
    }
    throw std::invalid_argument("kernel_matrix: unknown kind");
}

// --- MLP ---------------------------------------------------------------

namespace {

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// Layer widths including input and the scalar output.
std::vector<Eigen::Index> layer_widths(const MlpShape& shape) {
    std::vector<Eigen::Index> w;
    w.push_back(shape.inputs);
    for (auto h : shape.hidden) w.push_back(h);
    w.push_back(1);
    return w;
}

}  // namespace

Eigen::Index MlpShape::parameter_count() const {
    if (inputs <= 0) throw std::invalid_argument("MlpShape: inputs must be positive");
    for (auto h : hidden)
        if (h <= 0) throw std::invalid_argument("MlpShape: hidden widths must be positive");
    Eigen::Index n = 0, prev = inputs;
    for (auto h : hidden) {
        n += prev * h + h;
        prev = h;
    }
    n += prev + 1;
    return n;
}

Eigen::VectorXd mlp_init(const MlpShape& shape, std::uint64_t seed) {
    const auto widths = layer_widths(shape);
    Eigen::VectorXd theta(shape.parameter_count());
    Rng rng(derive_seed(seed, 0));
    Eigen::Index at = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const Eigen::Index fan_in = widths[l];
        const Eigen::Index fan_out = widths[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (Eigen::Index k = 0; k < fan_in * fan_out; ++k)
            theta[at++] = bound * (2.0 * rng.uniform() - 1.0);
        for (Eigen::Index k = 0; k < fan_out; ++k) theta[at++] = 0.0;
    }
    return theta;
}

double mlp_forward(const MlpShape& shape, const Eigen::VectorXd& theta, const Eigen::RowVectorXd& x) {
    if (x.size() != shape.inputs) throw std::invalid_argument("mlp_forward: input width mismatch");
    if (theta.size() != shape.parameter_count()) throw std::invalid_argument("mlp_forward: parameter count mismatch");
    const auto widths = layer_widths(shape);
    Eigen::VectorXd a = x.transpose();
    Eigen::Index at = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const Eigen::Index fi = widths[l], fo = widths[l + 1];
        const Eigen::Map<const Eigen::MatrixXd> W(theta.data() + at, fo, fi);
        at += fi * fo;
        const Eigen::Map<const Eigen::VectorXd> b(theta.data() + at, fo);
        at += fo;
        Eigen::VectorXd z = W * a + b;
        if (l + 2 < widths.size())
            for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = sigmoid(z[k]);
        a = std::move(z);
    }
    return a[0];
}

Eigen::VectorXd mlp_forward(const MlpShape& shape, const Eigen::VectorXd& theta, const Eigen::MatrixXd& X) {
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const Eigen::RowVectorXd xi = X.row(i);
        out[i] = mlp_forward(shape, theta, xi);
    }
    return out;
}

Eigen::VectorXd mlp_loss_gradient(const MlpShape& shape, const Eigen::VectorXd& theta,
                                  const Eigen::RowVectorXd& x, double y, double epsilon) {
    if (x.size() != shape.inputs) throw std::invalid_argument("mlp_loss_gradient: input width mismatch");
    if (theta.size() != shape.parameter_count())
        throw std::invalid_argument("mlp_loss_gradient: parameter count mismatch");
    const auto widths = layer_widths(shape);
    const std::size_t layers = widths.size() - 1;

    // Forward pass keeping activations per layer.
    std::vector<Eigen::VectorXd> act(layers + 1);
    act[0] = x.transpose();
    std::vector<Eigen::Index> w_at(layers), b_at(layers);
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < layers; ++l) {
        const Eigen::Index fi = widths[l], fo = widths[l + 1];
        w_at[l] = at;
        const Eigen::Map<const Eigen::MatrixXd> W(theta.data() + at, fo, fi);
        at += fi * fo;
        b_at[l] = at;
        const Eigen::Map<const Eigen::VectorXd> b(theta.data() + at, fo);
        at += fo;
        Eigen::VectorXd z = W * act[l] + b;
        if (l + 1 < layers)
            for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = sigmoid(z[k]);
        act[l + 1] = std::move(z);
    }

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta.size());
    // Backward pass; delta starts from d(loss)/d(output).
    Eigen::VectorXd delta(1);
    delta[0] = huber_dz(epsilon, y, act[layers][0]);
    for (std::size_t l = layers; l-- > 0;) {
        const Eigen::Index fi = widths[l], fo = widths[l + 1];
        const Eigen::Map<const Eigen::MatrixXd> W(theta.data() + w_at[l], fo, fi);
        Eigen::Map<Eigen::MatrixXd>(grad.data() + w_at[l], fo, fi) = delta * act[l].transpose();
        Eigen::Map<Eigen::VectorXd>(grad.data() + b_at[l], fo) = delta;
        if (l > 0) {
            Eigen::VectorXd up = W.transpose() * delta;
            // act[l] holds sigmoid outputs for hidden layers.
            for (Eigen::Index k = 0; k < up.size(); ++k) up[k] *= act[l][k] * (1.0 - act[l][k]);
            delta = std::move(up);
        }
    }
    return grad;
}

}  // namespace stabcp
