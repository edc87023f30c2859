#include <pybind11/pybind11.h>
PYBIND11_MODULE(_sata, m) { m.doc() = "placeholder"; }
