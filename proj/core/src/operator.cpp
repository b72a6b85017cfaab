#include "topopt/operator.hpp"

#include <algorithm>
#include <atomic>
#include <stdexcept>
#include <string>
#include <thread>
#include <type_traits>

namespace topopt {

std::string_view to_string(Variant v) noexcept {
  return v == Variant::fused ? "fused" : "three-stage";
}

std::string_view to_string(ScatterMode m) noexcept {
  return m == ScatterMode::serial ? "serial" : "parallel_atomic";
}

Variant parse_variant(std::string_view name) {
  if (name == "fused") return Variant::fused;
  if (name == "three-stage" || name == "three_stage") return Variant::three_stage;
  throw std::invalid_argument("unknown operator variant '" + std::string(name) +
                              "' (expected three-stage or fused)");
}

void LinearOperator::apply(std::span<const float> v, std::span<float> w) const {
  std::vector<double> vd(v.begin(), v.end());
  std::vector<double> wd(w.size());
  apply(std::span<const double>(vd), std::span<double>(wd));
  std::transform(wd.begin(), wd.end(), w.begin(), [](double x) { return static_cast<float>(x); });
}

namespace {

template <typename Fn>
void parallel_chunks(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads <= 1 || n < 2 * threads) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(threads - 1);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 1; t < threads; ++t) {
    const std::size_t begin = std::min(n, t * chunk);
    const std::size_t end = std::min(n, begin + chunk);
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  fn(std::size_t{0}, std::min(n, chunk));
}

template <typename T>
void atomic_add(T& target, T value) noexcept {
  std::atomic_ref<T>(target).fetch_add(value, std::memory_order_relaxed);
}

}  // namespace

MatFreeOperator::MatFreeOperator(std::shared_ptr<const DofMap> dofs, const UnitStiffness& unit_ke,
                                 std::span<const double> density, const SimpParams& simp,
                                 std::vector<std::uint8_t> fixed, OperatorOptions options)
    : dofs_(std::move(dofs)),
      fixed_(std::move(fixed)),
      options_(options),
      simp_(simp),
      ke64_(unit_ke.ke) {
  if (!dofs_) throw std::invalid_argument("MatFreeOperator: null DOF map");
  if (density.size() != dofs_->n_elem) {
    throw std::invalid_argument("MatFreeOperator: density has " + std::to_string(density.size()) +
                                " entries, mesh has " + std::to_string(dofs_->n_elem) +
                                " elements");
  }
  if (fixed_.empty()) fixed_.assign(dofs_->n_dof, 0);
  if (fixed_.size() != dofs_->n_dof) {
    throw std::invalid_argument("MatFreeOperator: fixed mask length does not match DOF count");
  }
  ke32_.resize(ke64_.size());
  for (std::size_t i = 0; i < ke64_.size(); ++i) {
    const auto f = static_cast<float>(ke64_[i]);
    ke32_[i] = options_.precision == Precision::bf16 ? round_to_bf16(f) : f;
  }
  scale64_.resize(density.size());
  scale32_.resize(density.size());
  for (std::size_t e = 0; e < density.size(); ++e) {
    scale64_[e] = simp_scale(density[e], simp_);
    scale32_[e] = static_cast<float>(scale64_[e]);
  }
}

unsigned MatFreeOperator::thread_count() const noexcept {
  if (options_.scatter == ScatterMode::serial) return 1;
  if (options_.threads > 0) return options_.threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

template <typename T>
void MatFreeOperator::check_storage(std::size_t v_size, std::size_t w_size) const {
  const bool want_double = options_.precision == Precision::fp64;
  if (want_double != std::is_same_v<T, double>) {
    throw std::logic_error(std::string("MatFreeOperator: storage type does not match precision ") +
                           std::string(to_string(options_.precision)));
  }
  if (v_size != dofs_->n_dof || w_size != dofs_->n_dof) {
    throw std::invalid_argument("MatFreeOperator: vector length " + std::to_string(v_size) + "/" +
                                std::to_string(w_size) + " does not match " +
                                std::to_string(dofs_->n_dof) + " DOFs");
  }
}

template <typename T>
const T* MatFreeOperator::element_matrix() const noexcept {
  if constexpr (std::is_same_v<T, double>) {
    return ke64_.data();
  } else {
    return ke32_.data();
  }
}

template <typename T>
const T* MatFreeOperator::scales() const noexcept {
  if constexpr (std::is_same_v<T, double>) {
    return scale64_.data();
  } else {
    return scale32_.data();
  }
}

template <typename T>
void MatFreeOperator::gather(std::span<const T> v, StageBuffers<T>& buf) const {
  const std::size_t ne = dofs_->n_elem;
  buf.u_elem.resize(ne * kDofsPerElement);
  const bool bf16 = options_.precision == Precision::bf16;
  parallel_chunks(ne, thread_count(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t e = begin; e < end; ++e) {
      const auto row = dofs_->row(e);
      T* u = buf.u_elem.data() + e * kDofsPerElement;
      for (std::size_t j = 0; j < kDofsPerElement; ++j) {
        const auto d = row[j];
        T x = fixed_[d] ? T{0} : v[d];
        if constexpr (std::is_same_v<T, float>) {
          if (bf16) x = round_to_bf16(x);
        }
        u[j] = x;
      }
    }
  });
}

template <typename T>
void MatFreeOperator::element_products(StageBuffers<T>& buf) const {
  const std::size_t ne = dofs_->n_elem;
  buf.f_elem.resize(ne * kDofsPerElement);
  const T* ke = element_matrix<T>();
  const T* s = scales<T>();
  parallel_chunks(ne, thread_count(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t e = begin; e < end; ++e) {
      const T* u = buf.u_elem.data() + e * kDofsPerElement;
      T* f = buf.f_elem.data() + e * kDofsPerElement;
      for (std::size_t i = 0; i < kDofsPerElement; ++i) {
        const T* k_row = ke + i * kDofsPerElement;
        T acc{0};
        for (std::size_t j = 0; j < kDofsPerElement; ++j) acc += k_row[j] * u[j];
        f[i] = s[e] * acc;
      }
    }
  });
}

template <typename T>
void MatFreeOperator::scatter(const StageBuffers<T>& buf, std::span<T> w) const {
  const std::size_t ne = dofs_->n_elem;
  const unsigned threads = thread_count();
  // FP32 reduces through a double histogram before casting back.
  std::vector<double> acc(dofs_->n_dof, 0.0);
  parallel_chunks(ne, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t e = begin; e < end; ++e) {
      const auto row = dofs_->row(e);
      const T* f = buf.f_elem.data() + e * kDofsPerElement;
      for (std::size_t i = 0; i < kDofsPerElement; ++i) {
        if (threads > 1) {
          atomic_add(acc[row[i]], static_cast<double>(f[i]));
        } else {
          acc[row[i]] += static_cast<double>(f[i]);
        }
      }
    }
  });
  for (std::size_t d = 0; d < dofs_->n_dof; ++d) w[d] = fixed_[d] ? T{0} : static_cast<T>(acc[d]);
}

template <typename T>
void MatFreeOperator::matvec_three_stage(std::span<const T> v, std::span<T> w) const {
  check_storage<T>(v.size(), w.size());
  StageBuffers<T> buf;
  gather(v, buf);
  element_products(buf);
  scatter(buf, w);
}

template <typename T>
void MatFreeOperator::fused_kernel(std::span<const T> v, std::span<T> w, const T* ke, const T* s,
                                   bool bf16, unsigned threads) const {
  std::fill(w.begin(), w.end(), T{0});
  parallel_chunks(dofs_->n_elem, threads, [&](std::size_t begin, std::size_t end) {
    T u[kDofsPerElement];
    for (std::size_t e = begin; e < end; ++e) {
      const auto row = dofs_->row(e);
      for (std::size_t j = 0; j < kDofsPerElement; ++j) {
        const auto d = row[j];
        T x = fixed_[d] ? T{0} : v[d];
        if constexpr (std::is_same_v<T, float>) {
          if (bf16) x = round_to_bf16(x);
        }
        u[j] = x;
      }
      for (std::size_t i = 0; i < kDofsPerElement; ++i) {
        const T* k_row = ke + i * kDofsPerElement;
        T acc{0};
        for (std::size_t j = 0; j < kDofsPerElement; ++j) acc += k_row[j] * u[j];
        const T f = s[e] * acc;
        if (threads > 1) {
          atomic_add(w[row[i]], f);
        } else {
          w[row[i]] += f;
        }
      }
    }
  });
  for (std::size_t d = 0; d < dofs_->n_dof; ++d) {
    if (fixed_[d]) w[d] = T{0};
  }
}

template <typename T>
void MatFreeOperator::matvec_fused(std::span<const T> v, std::span<T> w) const {
  check_storage<T>(v.size(), w.size());
  fused_kernel<T>(v, w, element_matrix<T>(), scales<T>(), options_.precision == Precision::bf16,
                  thread_count());
}

void MatFreeOperator::apply_reference(std::span<const double> v, std::span<double> w) const {
  if (v.size() != dofs_->n_dof || w.size() != dofs_->n_dof) {
    throw std::invalid_argument("MatFreeOperator: vector length does not match DOF count");
  }
  fused_kernel<double>(v, w, ke64_.data(), scale64_.data(), false, 1);
}

void MatFreeOperator::apply(std::span<const double> v, std::span<double> w) const {
  if (options_.precision == Precision::fp64) {
    if (options_.variant == Variant::fused) {
      matvec_fused<double>(v, w);
    } else {
      matvec_three_stage<double>(v, w);
    }
    return;
  }
  std::vector<float> vf(v.begin(), v.end());
  std::vector<float> wf(w.size());
  apply(std::span<const float>(vf), std::span<float>(wf));
  std::copy(wf.begin(), wf.end(), w.begin());
}

void MatFreeOperator::apply(std::span<const float> v, std::span<float> w) const {
  if (options_.precision == Precision::fp64) {
    LinearOperator::apply(v, w);
    return;
  }
  if (options_.variant == Variant::fused) {
    matvec_fused<float>(v, w);
  } else {
    matvec_three_stage<float>(v, w);
  }
}

void MatFreeOperator::project(std::span<double> v) const {
  for (std::size_t d = 0; d < v.size(); ++d) {
    if (fixed_[d]) v[d] = 0.0;
  }
}

std::vector<double> MatFreeOperator::jacobi_diagonal() const {
  std::vector<double> diag(dofs_->n_dof, 0.0);
  const bool wide = options_.precision == Precision::fp64;
  for (std::size_t e = 0; e < dofs_->n_elem; ++e) {
    const auto row = dofs_->row(e);
    for (std::size_t l = 0; l < kDofsPerElement; ++l) {
      const std::size_t ll = l * kDofsPerElement + l;
      diag[row[l]] += wide ? scale64_[e] * ke64_[ll]
                           : static_cast<double>(scale32_[e]) * static_cast<double>(ke32_[ll]);
    }
  }
  for (std::size_t d = 0; d < diag.size(); ++d) {
    if (fixed_[d]) diag[d] = 1.0;
  }
  return diag;
}

template void MatFreeOperator::matvec_three_stage<double>(std::span<const double>,
                                                          std::span<double>) const;
template void MatFreeOperator::matvec_three_stage<float>(std::span<const float>,
                                                         std::span<float>) const;
template void MatFreeOperator::matvec_fused<double>(std::span<const double>,
                                                    std::span<double>) const;
template void MatFreeOperator::matvec_fused<float>(std::span<const float>, std::span<float>) const;
template void MatFreeOperator::gather<double>(std::span<const double>, StageBuffers<double>&) const;
template void MatFreeOperator::gather<float>(std::span<const float>, StageBuffers<float>&) const;
template void MatFreeOperator::element_products<double>(StageBuffers<double>&) const;
template void MatFreeOperator::element_products<float>(StageBuffers<float>&) const;
template void MatFreeOperator::scatter<double>(const StageBuffers<double>&,
                                               std::span<double>) const;
template void MatFreeOperator::scatter<float>(const StageBuffers<float>&, std::span<float>) const;

}  // namespace topopt
