#include <math.h>
#include <stdio.h>
#include <string.h>

#include "popaudit.h"

static int check(PopauditStatus s, const char *what) {
    if (s != POPAUDIT_STATUS_OK) {
        const char *msg = popaudit_last_error_message();
        fprintf(stderr, "%s failed with %d: %s\n", what, (int)s, msg ? msg : "(none)");
        return 1;
    }
    return 0;
}

int main(int argc, char **argv) {
    if (argc != 3) {
        fprintf(stderr, "usage: smoke <ratings.dat> <movies.dat>\n");
        return 2;
    }
    PopauditDataset *data = NULL;
    if (check(popaudit_dataset_load(argv[1], argv[2], POPAUDIT_FORMAT_ML1M, &data), "load")) return 1;
    PopauditStats stats;
    if (check(popaudit_dataset_stats(data, &stats), "stats")) return 1;
    printf("users=%zu items=%zu interactions=%zu\n", stats.users, stats.items, stats.interactions);
    popaudit_dataset_free(data);

    double p[3] = {0.5, 0.5, 0.0};
    double q[3] = {0.0, 0.5, 0.5};
    double d = -1.0;
    if (check(popaudit_jsd(p, q, &d), "jsd")) return 1;
    printf("jsd=%.6f\n", d);

    double lift = 0.0;
    PopauditStatus s = popaudit_popularity_lift(0.0, 1.0, &lift);
    if (s != POPAUDIT_STATUS_CONFIG || popaudit_last_error_message() == NULL) {
        fprintf(stderr, "zero APP should be rejected\n");
        return 1;
    }
    printf("version=%s\n", popaudit_version());
    return 0;
}
