#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace mfsg {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IndexSet = std::vector<Index>;

// Contiguous equal-width blocks: predictor j owns rows [j*m, (j+1)*m).
struct BlockLayout {
    Index num_blocks = 0;
    Index block_size = 0;

    Index total() const { return num_blocks * block_size; }
    Index offset(Index j) const { return j * block_size; }

    template <class V>
    auto block(V& v, Index j) const { return v.segment(offset(j), block_size); }

    template <class M>
    auto diag_block(M& a, Index j) const
    {
        return a.block(offset(j), offset(j), block_size, block_size);
    }
};

} // namespace mfsg
