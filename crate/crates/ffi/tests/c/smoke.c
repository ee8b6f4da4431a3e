#include <stdio.h>
#include "axistream.h"

int main(void) {
    AxiProblem *p = NULL;
    if (axi_problem_new(1.0, 1.0, 0.25, 16, 16, &p) != AXI_STATUS_OK) return 1;
    size_t nr = 0, nz = 0;
    axi_problem_size(p, &nr, &nz);
    double omega[256], psi[256], residual = 1.0;
    for (size_t k = 0; k < nr * nz; ++k) omega[k] = 1.0;
    if (axi_solve(p, omega, psi, nr * nz, 1e-10, &residual, NULL) != AXI_STATUS_OK) return 2;
    axi_problem_free(p);
    if (axi_problem_new(1.0, 1.0, 0.75, 16, 16, &p) != AXI_STATUS_INVALID_ARGUMENT) return 3;
    char msg[128];
    axi_last_error_message(msg, sizeof msg);
    printf("%s %.3e %s\n", axi_version(), residual, msg);
    return residual <= 1e-10 && psi[0] > 0.0 ? 0 : 4;
}
