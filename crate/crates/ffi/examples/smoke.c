/* Links against libiwocs_ffi and solves the windy walk both ways. */
#include <stdio.h>
#include <math.h>
#include "iwocs.h"

int main(void) {
    IwocsModelSet *set = NULL;
    if (iwocs_set_windy_walk(25, &set) != IWOCS_STATUS_OK) {
        fprintf(stderr, "set: %s\n", iwocs_last_error());
        return 1;
    }
    double robust[36];
    if (iwocs_robust_value_iteration(set, 1e-6, 0, robust, 36, NULL) != IWOCS_STATUS_OK) {
        fprintf(stderr, "rvi: %s\n", iwocs_last_error());
        return 1;
    }
    IwocsRunSummary summary;
    if (iwocs_run(set, 0, 1e-2, 1e-3, 25, &summary, NULL, 0) != IWOCS_STATUS_OK) {
        fprintf(stderr, "iwocs: %s\n", iwocs_last_error());
        return 1;
    }
    double gap = fabs(summary.candidate_value - robust[0]);
    printf("rvi %.6f iwocs %.6f iterations %zu gap %.2e\n", robust[0], summary.candidate_value,
           summary.iterations, gap);
    iwocs_set_free(set);
    return gap <= 1e-2 ? 0 : 1;
}
