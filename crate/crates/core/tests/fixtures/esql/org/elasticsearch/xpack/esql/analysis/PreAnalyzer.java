package org.elasticsearch.xpack.esql.analysis;

import java.util.HashSet;
import java.util.Set;

import org.elasticsearch.xpack.esql.plan.LogicalPlan;

public class PreAnalyzer {

    public static class PreAnalysis {
        private final Set<String> policyNames;

        public PreAnalysis(Set<String> policyNames) {
            this.policyNames = policyNames;
        }

        public Set<String> policyNames() {
            return policyNames;
        }
    }

    public PreAnalysis preAnalyze(LogicalPlan plan) {
        Set<String> names = new HashSet<>(plan.enrichPolicyNames());
        return new PreAnalysis(names);
    }
}
