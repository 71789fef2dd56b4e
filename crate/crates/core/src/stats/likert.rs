//! Five-point Likert questionnaire summaries.

use std::io::Read;

use crate::error::StatsError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuestionSummary {
    /// Counts of responses 1 through 5.
    pub counts: [usize; 5],
    pub respondents: usize,
    /// Share answering 4 or 5, integer percent rounded half up.
    pub top2_percent: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LikertSummary {
    pub questions: Vec<QuestionSummary>,
}

/// `responses[q]` holds every answer to question q (1-based in errors).
pub fn likert_summary(responses: &[Vec<u8>]) -> Result<LikertSummary, StatsError> {
    let mut questions = Vec::with_capacity(responses.len());
    for (q, answers) in responses.iter().enumerate() {
        let mut counts = [0usize; 5];
        for &value in answers {
            if !(1..=5).contains(&value) {
                return Err(StatsError::OutOfRangeResponse { question: q + 1, value });
            }
            counts[value as usize - 1] += 1;
        }
        let n = answers.len();
        let top2 = counts[3] + counts[4];
        // round(100 top2 / n) half up, in integers
        let top2_percent = if n == 0 { 0 } else { ((200 * top2 + n) / (2 * n)) as u8 };
        questions.push(QuestionSummary { counts, respondents: n, top2_percent });
    }
    Ok(LikertSummary { questions })
}

/// Read a questionnaire CSV: a header row naming the questions, then one
/// row per respondent with an answer in `1..=5` for every question.
/// Returns answers grouped by question.
pub fn read_likert_csv<R: Read>(source: R) -> Result<Vec<Vec<u8>>, StatsError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let width = reader.headers().map_err(|e| StatsError::Csv { line: 1, reason: e.to_string() })?.len();
    let mut questions = vec![Vec::new(); width];
    for record in reader.records() {
        let record = record.map_err(|e| StatsError::Csv {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        for (q, field) in record.iter().enumerate() {
            let value: u8 = field
                .parse()
                .map_err(|_| StatsError::Csv { line, reason: format!("bad response `{field}`") })?;
            questions[q].push(value);
        }
    }
    Ok(questions)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twenty_one_of_twenty_four() {
        let mut answers = vec![5u8; 21];
        answers.extend([3, 2, 1]);
        let s = likert_summary(&[answers]).unwrap();
        assert_eq!(s.questions[0].top2_percent, 88);
        assert_eq!(s.questions[0].counts, [1, 1, 1, 0, 21]);
    }

    #[test]
    fn extremes() {
        let s = likert_summary(&[vec![5; 10], vec![1, 2, 3, 3]]).unwrap();
        assert_eq!(s.questions[0].top2_percent, 100);
        assert_eq!(s.questions[1].top2_percent, 0);
    }

    #[test]
    fn reads_questionnaire_csv() {
        let q = read_likert_csv("q1,q2\n5,4\n3,5\n".as_bytes()).unwrap();
        assert_eq!(q, vec![vec![5, 3], vec![4, 5]]);
        assert!(matches!(read_likert_csv("q1\nx\n".as_bytes()), Err(StatsError::Csv { line: 2, .. })));
    }

    #[test]
    fn out_of_range() {
        assert_eq!(
            likert_summary(&[vec![1], vec![4, 6]]),
            Err(StatsError::OutOfRangeResponse { question: 2, value: 6 })
        );
        assert!(likert_summary(&[vec![0]]).is_err());
    }
}
