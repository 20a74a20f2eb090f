package org.elasticsearch.xpack.esql.optimizer;

import org.elasticsearch.xpack.esql.plan.LogicalPlan;

public class LogicalPlanOptimizer {
    private int maxIterations = 100;

    public LogicalPlan optimize(LogicalPlan plan) {
        LogicalPlan current = plan;
        for (int i = 0; i < maxIterations; i++) {
            LogicalPlan next = current.pushDownFilters();
            if (next == current) {
                break;
            }
            current = next;
        }
        return current;
    }
}
