#include "frgt/tensor.hpp"

namespace frgt::ad {

const char* op_name(Op op) {
    switch (op) {
        case Op::input: return "input";
        case Op::matmul: return "matmul";
        case Op::add: return "add";
        case Op::add_rows: return "add_rows";
        case Op::sub: return "sub";
        case Op::mul: return "mul";
        case Op::relu: return "relu";
        case Op::add_scalar: return "add_scalar";
        case Op::scale: return "scale";
        case Op::concat: return "concat";
        case Op::layer_norm: return "layer_norm";
        case Op::gather_rows: return "gather_rows";
        case Op::segment_sum: return "segment_sum";
        case Op::segment_softmax_weighted_sum: return "segment_softmax_weighted_sum";
        case Op::sum_all: return "sum_all";
    }
    return "?";
}

}  // namespace frgt::ad
